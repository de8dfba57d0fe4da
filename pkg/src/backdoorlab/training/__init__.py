from .harness import (RunLog, TorchImageDataset, build_loss, evaluate,
                      load_checkpoint, save_checkpoint, set_deterministic,
                      train)
from .models import (ARCHITECTURES, ModelHandle, ResNet18, SmallCNN,
                     build_model, wrap_model)
from .schedule import TestSchedule, TrainSchedule

__all__ = ["ARCHITECTURES", "ModelHandle", "ResNet18", "RunLog", "SmallCNN",
           "TestSchedule", "TorchImageDataset", "TrainSchedule", "build_loss",
           "build_model", "evaluate", "load_checkpoint", "save_checkpoint",
           "set_deterministic", "train", "wrap_model"]
