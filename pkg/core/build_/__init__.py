""" contains run info-file tools """
from .__gen_metafile import build_infofile, config_digest
