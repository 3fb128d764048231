"""beamnet: a desk-scale lab for sub-6GHz aided mm-wave beam prediction.

Subpackage map:

  config    scenario presets, MAC timing profiles, config-file parsing
  channels  seeded geometric channel synthesis and Doppler aging
  dataset   feature assembly, normalization, dataset (de)serialization
  beams     DFT codebook, spectral efficiency, exhaustive search, overhead
  autodiff  reverse-mode tensor engine
  losses    Huber / MAE / RMSE
  optim     Adam, plateau scheduler, early stopping
  model     the convolution + multi-head-attention beam regressor
  train     mini-batch training loop
  evaluate  oracle-relative evaluation metrics
  sweeps    SNR / velocity / distance / Doppler studies, loss comparison
  cli       command-line runner
"""

__version__ = "0.1.0"

from . import autodiff, beams, channels, config, dataset, losses, model, optim
from .beams import (Codebook, LinkBudget, beam_training_gain, build_codebook,
                    effective_channel, exhaustive_search, overhead_adjusted_se,
                    spectral_efficiency, spectral_efficiency_sum)
from .channels import apply_doppler, sample_geometry, synthesize_channel
from .config import (CV2X, DEFAULT_MAC, IEEE80211BD, MacProfile, ScenarioConfig,
                     highway, rural, urban)
from .dataset import (Dataset, NormMeta, generate_dataset, load_dataset,
                      normalize_dataset, save_dataset)
from .evaluate import EvalReport, evaluate, evaluate_predictions
from .losses import huber_loss, mae, rmse
from .model import (Model, ModelConfig, build_model, forward, load_model,
                    param_count, predict_beam, save_model)
from .optim import (OptimizerState, SchedulerState, adam_step, early_stop,
                    scheduler_step)
from .train import TrainConfig, TrainReport, train
from .sweeps import (SweepResult, compare_losses, sweep_distance, sweep_doppler,
                     sweep_snr, sweep_velocity, sweep_velocity_distance,
                     write_sweep_csv)
