"""JSON run configuration.

Top-level keys: kernel, variant, N, initial, bath, integrator, outputs,
diagnostics.  :meth:`RunConfig.to_dict` returns the fully resolved form that
gets echoed into run summaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .integrate import IntegratorConfig
from .kernels import BoundCertificate, RateKernel, builtin_kernel, certificate_from_spec, load_table_kernel
from .state import InitialSpec, Variant

KNOWN_KEYS = {"kernel", "variant", "N", "initial", "bath", "integrator", "outputs", "diagnostics"}

DEFAULT_OUTPUTS = {
    "timeseries": "timeseries.csv",
    "summary": "summary.json",
    "sweep": "sweep.csv",
    "audit": "audit.json",
    "equilibrium": "equilibrium.json",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kernel: dict
    N: int
    variant: Variant = Variant.ISOLATED
    initial: dict = field(default_factory=lambda: {"shape": "monodisperse", "size": 1, "amount": 1.0})
    bath: float | None = None
    integrator: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), repr=False)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_dir: Path | str = ".") -> "RunConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kernel" not in raw or "N" not in raw:
            raise ConfigError("config needs at least 'kernel' and 'N'")
        N = raw["N"]
        if isinstance(N, bool) or not isinstance(N, int) or N < 1:
            raise ConfigError(f"N must be an integer >= 1, got {N!r}")
        try:
            variant = Variant(raw.get("variant", "isolated"))
        except ValueError:
            raise ConfigError(f"variant must be 'isolated' or 'non-isolated', got {raw.get('variant')!r}") from None
        bath = raw.get("bath")
        if variant is Variant.NON_ISOLATED and (bath is None or not bath >= 0):
            raise ConfigError("non-isolated runs need 'bath' >= 0")
        kernel = raw["kernel"]
        if not isinstance(kernel, Mapping) or not ("name" in kernel or "table" in kernel):
            raise ConfigError("kernel must be an object with 'name' or 'table'")
        cfg = cls(kernel=dict(kernel), N=N, variant=variant,
                  initial=dict(raw.get("initial", cls.__dataclass_fields__["initial"].default_factory())),
                  bath=None if bath is None else float(bath),
                  integrator=dict(raw.get("integrator", {})), outputs={**DEFAULT_OUTPUTS, **raw.get("outputs", {})},
                  diagnostics=dict(raw.get("diagnostics", {})), base_dir=Path(base_dir))
        # fail early on anything that would only blow up mid-run
        cfg.build_kernel()
        cfg.certificate()
        cfg.initial_spec()
        cfg.integrator_config()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def build_kernel(self) -> RateKernel:
        spec = self.kernel
        try:
            if "table" in spec:
                path = Path(spec["table"])
                if not path.is_absolute():
                    path = self.base_dir / path
                return load_table_kernel(path, enforce_null=bool(spec.get("enforce_null", False)))
            params = {k: v for k, v in spec.items() if k not in ("name", "certificate")}
            return builtin_kernel(spec["name"], **params)
        except (OSError, TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad kernel spec {spec!r}: {exc}") from exc

    def certificate(self) -> BoundCertificate | None:
        spec = self.kernel.get("certificate")
        if spec is None:
            return None
        try:
            return certificate_from_spec(spec)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad certificate {spec!r}: {exc}") from exc

    def initial_spec(self, N: int | None = None) -> InitialSpec:
        spec = dict(self.initial)
        shape = spec.pop("shape", "monodisperse")
        if "values" in spec:
            spec["values"] = tuple(spec["values"])
        try:
            return InitialSpec(shape, self.N if N is None else N, **spec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad initial spec {self.initial!r}: {exc}") from exc

    def integrator_config(self) -> IntegratorConfig:
        spec = dict(self.integrator)
        if spec.get("h_max") is None:
            spec.pop("h_max", None)
        if "sample_times" in spec:
            spec["sample_times"] = tuple(spec["sample_times"])
        try:
            return IntegratorConfig(**spec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad integrator spec {self.integrator!r}: {exc}") from exc

    def output_path(self, key: str, out_dir: Path) -> Path:
        return Path(out_dir) / self.outputs[key]

    def _resolved_initial(self) -> dict:
        spec = self.initial_spec()
        out = {"shape": spec.shape, "size": spec.size, "amount": spec.amount, "ratio": spec.ratio}
        if spec.shape == "explicit":
            out["values"] = list(spec.values)
        return out

    def _resolved_kernel(self) -> dict:
        spec = dict(self.kernel)
        if "table" in spec:
            path = Path(spec["table"])
            spec["table"] = str(path if path.is_absolute() else (self.base_dir / path).resolve())
        return spec

    def to_dict(self) -> dict:
        return {
            "kernel": self._resolved_kernel(),
            "variant": self.variant.value,
            "N": self.N,
            "initial": self._resolved_initial(),
            "bath": self.bath,
            "integrator": self.integrator_config().to_dict(),
            "outputs": self.outputs,
            "diagnostics": self.diagnostics,
        }
