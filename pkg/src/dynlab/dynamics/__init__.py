from dynlab.dynamics.disk import DiskFlowField, SuspensionField, field_X
from dynlab.dynamics.toral import ToralAutomorphism, expansion_rate_eta

__all__ = ["DiskFlowField", "SuspensionField", "field_X", "ToralAutomorphism", "expansion_rate_eta"]
