from core.config import RunConfig, dump_config, load_config  # noqa
from core.ds_constants import get_output_root  # noqa
from core.errors import ConfigError, DPAError, FigDataError, NumericError, ScenarioError  # noqa
