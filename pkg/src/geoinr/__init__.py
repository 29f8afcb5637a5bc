"""geoinr: location encodings and implicit neural representations for
Earth signals, with subgroup-stratified fairness evaluation."""

__version__ = "0.1.0"

from .encoders import (
    EncodingSpec,
    EncodingVector,
    Cartesian3DEncoder,
    DirectEncoder,
    SphereCPlusEncoder,
    SphereMPlusEncoder,
    SphericalHarmonicEncoder,
    SphericalWaveletEncoder,
    TheoryEncoder,
    encoding_benchmark,
    make_encoder,
    parse_encoding_spec,
)
from .fairness import pearson, stratify
from .grids import (
    GridDataset,
    SampleSet,
    generate_archipelago,
    generate_checkerboard,
    read_grid,
    sample_points,
    write_grid,
)
from .siren import SirenEstimator
from .sphere import (
    EulerRotation,
    PoleSingularityError,
    SpherePoint,
    cell_area_km2,
    fibonacci_lattice,
    great_circle_distance,
)

__all__ = [
    "EncodingSpec",
    "EncodingVector",
    "Cartesian3DEncoder",
    "DirectEncoder",
    "SphereCPlusEncoder",
    "SphereMPlusEncoder",
    "SphericalHarmonicEncoder",
    "SphericalWaveletEncoder",
    "TheoryEncoder",
    "encoding_benchmark",
    "make_encoder",
    "parse_encoding_spec",
    "pearson",
    "stratify",
    "GridDataset",
    "SampleSet",
    "generate_archipelago",
    "generate_checkerboard",
    "read_grid",
    "sample_points",
    "write_grid",
    "SirenEstimator",
    "EulerRotation",
    "PoleSingularityError",
    "SpherePoint",
    "cell_area_km2",
    "fibonacci_lattice",
    "great_circle_distance",
    "__version__",
]
