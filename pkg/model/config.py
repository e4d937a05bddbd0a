"""Pipeline parameters.

Defaults follow the field deployment this toolkit targets: 5 minute sampling,
20 minute minimum stay, ``minPts = 4`` for indoor POIs, ``A_L = 35`` APs for the
adaptive threshold and ``a_L = 25 m`` for trustworthy GPS fixes.
"""

from typing import Any, Dict

from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.exceptions import ConfigurationError


class PipelineConfig(BaseModel):
    """Immutable, validated parameter set handed to every pipeline stage."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # sampling and dwell
    scan_interval_s: int = Field(300, gt=0, description="WiFi/GPS sampling interval")
    min_dwell_s: int = Field(1200, gt=0, description="minimum stay duration")
    tz_offset_hours: float = Field(0.0, ge=-14, le=14, description="offset used for dates in reports")

    # indoor POI clustering
    min_pts_poi: int = Field(4, ge=1, description="minPts for indoor POI DBSCAN")
    ap_low_count: int = Field(35, ge=1, description="A_L, AP count below which eps_low applies")
    eps_low: float = Field(0.4, gt=0, le=1, description="similarity threshold for sparse fingerprints")
    eps_high: float = Field(0.6, gt=0, le=1, description="similarity threshold for dense fingerprints")
    visit_gap_factor: float = Field(2.0, gt=0, description="scan gaps above factor * interval split visits")

    # community detection
    louvain_partition_threshold: float = Field(0.5, gt=0, le=1)

    # micro mobility
    micromobility_eps: float = Field(0.3, gt=0, le=1)
    min_pts_micro: int = Field(1, ge=1)
    gps_accuracy_max: float = Field(25.0, gt=0, description="a_L, high-accuracy GPS cutoff in meters")
    gps_match_tolerance_s: int = Field(150, ge=0, description="largest scan/fix time skew")

    # GPS cleaning and stay points
    gps_accuracy_filter: float = Field(50.0, gt=0, description="fixes less accurate than this are dropped")
    max_speed_mps: float = Field(50.0, gt=0)
    stay_radius_m: float = Field(200.0, gt=0)
    geo_eps_m: float = Field(50.0, gt=0)
    geo_minpts: int = Field(1, ge=1)

    # fusion
    heatmap_cell_m: float = Field(25.0, gt=0)
    fusion_match_intervals: int = Field(2, ge=0, description="GPS anchor search radius in scan intervals")

    # ingest
    max_batch_hours: float = Field(6.0, gt=0)

    # execution
    n_jobs: int = Field(1, description="joblib workers for sweeps and per-user fan-out")

    @model_validator(mode="after")
    def _check_thresholds(self) -> "PipelineConfig":
        if self.eps_low > self.eps_high:
            raise ValueError(f"eps_low ({self.eps_low}) must not exceed eps_high ({self.eps_high})")
        return self

    @property
    def visit_gap_s(self) -> float:
        return self.visit_gap_factor * self.scan_interval_s

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Return a validated copy with some fields replaced."""
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return build_config(values)

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def build_config(values: Dict[str, Any]) -> PipelineConfig:
    """
    Build a PipelineConfig, turning pydantic errors into ConfigurationError.

    Args:
        values (Dict[str, Any]): Field values; missing fields take defaults

    Returns:
        PipelineConfig: The validated configuration

    Raises:
        ConfigurationError: If a value is missing its constraints
    """
    try:
        return PipelineConfig(**values)
    except ValueError as e:
        raise ConfigurationError(f"Invalid pipeline configuration: {e}") from e
