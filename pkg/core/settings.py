"""static settings for the simulator."""

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Settings:
    """class - a set of numeric floors and file conventions shared by all modules."""

    BASE_DIR = Path(__file__).parent.parent

    PROJECT_NAME = "dpa-unidaod-sim"
    SCHEMA_VERSION = 1

    # numerics
    EPS_LOG = 1e-7  # log / log(1-.) arguments live in [EPS_LOG, 1 - EPS_LOG]
    SIGMA_FLOOR = 1e-6  # cdf clamps sigma to at least this
    PSI_FLOOR = 1e-6  # below this the histogram collapses to a single bin
    WEIGHT_DENOM_FLOOR = 1e-12  # gdpa weight normalizer fallback

    # domain labels
    SOURCE = 0
    TARGET = 1

    # files
    OUTPUT_ROOT_ENV = "DPA_OUTPUT_ROOT"
    DEFAULT_OUTPUT_ROOT = "runs"
    DEFAULT_INFOFILE_NAME = "run_info.yaml"
    METRICS_FILE_NAME = "metrics.csv"
    SUMMARY_FILE_NAME = "evaluation.yaml"
    CSV_FLOAT_FORMAT = "%.12g"

    # metrics csv, fixed order
    METRICS_COLUMNS = (
        "iteration",
        "epoch",
        "alpha",
        "lr",
        "p_global_s",
        "p_global_t",
        "p_inst_s",
        "p_inst_t",
        "gap_global",
        "gap_instance",
        "w_s",
        "w_t",
        "weight_fig",
        "inst_weight_s",
        "inst_weight_t",
        "neg_frac_global_s",
        "neg_frac_global_t",
        "neg_frac_inst_s",
        "neg_frac_inst_t",
        "excluded_frac_inst",
        "loss_det",
        "loss_gdpa",
        "loss_idsa",
        "loss_pcc",
        "loss_bound",
        "loss_total",
        "target_shared_acc",
        "radius_s",
        "radius_t",
        "eps_s",
        "eps_t",
        "events",
    )


settings = Settings()
