"""Exception types. Each carries a stable machine-readable ``code``."""


class StitError(Exception):
    code = "error"


class InfeasiblePolytope(StitError):
    code = "geometry.infeasible"


class Unbounded(StitError):
    code = "geometry.unbounded"


class DegenerateZonotope(StitError, ValueError):
    code = "geometry.degenerate_zonotope"


class IndexOutOfRange(StitError, IndexError):
    code = "geometry.index_out_of_range"


class DimensionMismatch(StitError, ValueError):
    code = "dimension_mismatch"


class RateUnderflow(StitError):
    code = "tessellate.rate_underflow"


class OutOfWindow(StitError, ValueError):
    code = "tessellate.out_of_window"


class RankDeficient(StitError, ValueError):
    code = "oblique.rank_deficient"


class NotNormalized(StitError, ValueError):
    code = "oblique.not_normalized"


class InvalidTarget(StitError, ValueError):
    code = "labx.invalid_target"


class SchemaVersionMismatch(StitError):
    code = "io.schema_version"


class ModelFormatError(StitError):
    code = "io.parse"


class ConfigError(StitError):
    code = "config.invalid"
