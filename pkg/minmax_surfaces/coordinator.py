"""Phase pipeline of a scenario run."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import os
from pathlib import Path
import time
from typing import Any, Callable

import numpy as np

from .ambient import AmbientDomain, load_domain
from .amin import (
    AMQuery,
    SearchBudget,
    enlarged_region,
    freeze_splice,
    is_eps_almost_minimizing,
    is_eps_almost_minimizing_in_annuli,
)
from .artifacts import ArtifactStore, mass_profile_rows
from .comb import Annulus, Ball, make_annulus_tuple, refine_covering
from .config_flow import BUILDER_LEVEL_SET
from .const import (
    CONF_AMIN,
    CONF_COMB,
    CONF_DIAGNOSTICS,
    CONF_DOMAIN,
    CONF_FAMILY,
    CONF_MODE,
    CONF_NAME,
    CONF_OUTPUT_DIR,
    CONF_PLATEAU,
    CONF_SCENARIO,
    CONF_SEED,
    CONF_TIGHTEN,
    CONSTRAINED,
    DEFAULT_OUTPUT_DIR,
    ENV_OUTPUT_DIR,
    PHASE_BUILD,
    PHASE_CERTIFY,
    PHASE_DIAGNOSE,
    PHASE_REPLACE,
    PHASE_TIGHTEN,
    PHASES,
    RADIUS_RATIO,
    UNCONSTRAINED,
    omega,
)
from .exceptions import (
    CombinatorialError,
    EstimateViolated,
    NotGraphical,
    NotStable,
    NotStationary,
    PhaseError,
    SweepoutError,
)
from .geometry import max_edge_length
from .plateau import construct_replacement
from .plots import curve_overlay, line_plot
from .scenarios import Scenario, get_scenario, seed_slice
from .sweepout import (
    Slice,
    SweepoutFamily,
    build_connecting_sweepout,
    build_level_set_sweepout,
    minmax_report,
    slice_mass,
    validate_family,
)
from .tighten import TightenParams, class_for_mode, pull_tight, stationarity_residual
from .varifold import (
    boundary_report,
    convex_hull_check,
    density_profiles,
    local_min_gap,
    second_variation_spectrum,
    to_varifold,
    wedge_check,
)

_LOGGER = logging.getLogger(__name__)


def resolve_output_dir(config: dict[str, Any], override: str | Path | None = None) -> Path:
    """Return the output directory: explicit override, then environment, then config."""
    if override is not None:
        return Path(override)
    if os.environ.get(ENV_OUTPUT_DIR):
        return Path(os.environ[ENV_OUTPUT_DIR])
    return Path(config.get(CONF_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR)


def probe_point(slice_: Slice) -> np.ndarray:
    """Return the point where a slice is certified and replaced: its middle vertex."""
    vertices = slice_.vertices
    if slice_.is_trivial or not slice_.is_mesh:
        return vertices[len(vertices) // 2].copy()
    return vertices[int(np.argmin(np.linalg.norm(vertices - vertices.mean(axis=0), axis=1)))].copy()


def gamma_trace(domain: AmbientDomain, slice_: Slice) -> dict[str, Any]:
    """Return how closely the boundary of a slice traces gamma.

    Every boundary vertex must sit on gamma and every gamma component must
    come within one edge of a boundary vertex, at multiplicity 1.
    """
    points = slice_.boundary_points()
    if len(points) == 0:
        return {"distance": None, "coverage": None, "multiplicity": slice_.multiplicity, "passed": False}
    distance = float(np.max(domain.gamma.distance(points)))
    coverage = max(
        float(np.max(np.min(np.linalg.norm(c.samples()[:, None, :] - points[None, :, :], axis=2), axis=1)))
        for c in domain.gamma.components
    )
    edge = max_edge_length(slice_.vertices, slice_.faces)
    passed = distance <= domain.tol_bdry and coverage <= edge and slice_.multiplicity == 1
    return {"distance": distance, "coverage": coverage, "multiplicity": slice_.multiplicity, "passed": passed}


@dataclass
class Assertion:
    """One pass/fail claim of a run."""

    name: str
    passed: bool
    value: float | None
    target: float | None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {"name": self.name, "passed": self.passed, "value": self.value, "target": self.target, "detail": self.detail}


@dataclass
class RunReport:
    """Everything a run claims, with the artifacts backing it."""

    name: str
    criterion: str
    m0_trace: list[float]
    critical: dict[str, Any]
    certificates: list[dict[str, Any]]
    freezes: list[dict[str, Any]]
    replacement: dict[str, Any] | None
    diagnostics: dict[str, Any]
    assertions: list[Assertion]
    timings: dict[str, float]
    config: dict[str, Any]
    artifacts: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """Return True when every enabled assertion holds."""
        return all(a.passed for a in self.assertions)

    def to_dict(self) -> dict[str, Any]:
        """Return the report.json content."""
        return {
            "name": self.name,
            "criterion": self.criterion,
            "passed": self.passed,
            "m0_trace": self.m0_trace,
            "critical": self.critical,
            "certificates": self.certificates,
            "freezes": self.freezes,
            "replacement": self.replacement,
            "diagnostics": self.diagnostics,
            "assertions": [a.to_dict() for a in self.assertions],
            "timings": self.timings,
            "config": self.config,
            "artifacts": self.artifacts,
        }


class MinMaxCoordinator:
    """Run the phases of one scenario and collect their results in ``data``."""

    def __init__(self, config: dict[str, Any], out_dir: str | Path | None = None) -> None:
        """Initialize the coordinator from a validated config."""
        self.config = config
        self.scenario: Scenario | None = get_scenario(config[CONF_SCENARIO]) if CONF_SCENARIO in config else None
        self.store = ArtifactStore(resolve_output_dir(config, out_dir))
        self.data: dict[str, Any] = {}
        self.timings: dict[str, float] = {}
        self._handlers: dict[str, Callable[[], None]] = {}

        # Register phase handlers
        self.register_phase_handler(PHASE_BUILD, self._handle_build)
        self.register_phase_handler(PHASE_TIGHTEN, self._handle_tighten)
        self.register_phase_handler(PHASE_CERTIFY, self._handle_certify)
        self.register_phase_handler(PHASE_REPLACE, self._handle_replace)
        self.register_phase_handler(PHASE_DIAGNOSE, self._handle_diagnose)

    def register_phase_handler(self, phase: str, handler: Callable[[], None]) -> None:
        """Register the handler of a pipeline phase."""
        self._handlers[phase] = handler

    @property
    def domain(self) -> AmbientDomain:
        """Return the domain built in the first phase."""
        return self.data["domain"]

    def run(self) -> RunReport:
        """Run every phase in order and write the artifacts."""
        for phase in PHASES:
            handler = self._handlers.get(phase)
            if handler is None:
                continue
            _LOGGER.info("Phase %s started", phase)
            start = time.perf_counter()
            try:
                handler()
            except Exception as err:
                _LOGGER.error("Phase %s failed: %s", phase, err)
                raise PhaseError(phase, f"Error in phase {phase}: {err}") from err
            self.timings[phase] = time.perf_counter() - start
            _LOGGER.info("Phase %s finished in %.2f s", phase, self.timings[phase])
        report = self._report()
        self.store.json("report.json", report.to_dict())
        _LOGGER.info("Scenario %s %s", report.name, "passed" if report.passed else "FAILED")
        return report

    # -- phases ---------------------------------------------------------------

    def _handle_build(self) -> None:
        """Build the domain, seeds and the initial sweepout."""
        domain = load_domain(self.config[CONF_DOMAIN])
        fam = self.config[CONF_FAMILY]
        seeds = None
        refined = None
        if fam["builder"] == BUILDER_LEVEL_SET:
            family = build_level_set_sweepout(
                domain, fam["sweep_axis"], fam["resolution"], fam["n_vertices"], fam["n_rings"], fam["n_theta"]
            )
            if fam["refine"]:
                refined = build_level_set_sweepout(
                    domain, fam["sweep_axis"], 2 * fam["resolution"] - 1, fam["n_vertices"], fam["n_rings"], fam["n_theta"]
                )
        else:
            seeds = tuple(seed_slice(domain, seed, fam) for seed in fam["seeds"])
            family = build_connecting_sweepout(domain, *seeds, fam["resolution"], fam["n_vertices"], fam.get("n_profile"))
            if fam["refine"]:
                refined = build_connecting_sweepout(
                    domain, *seeds, 2 * fam["resolution"] - 1, fam["n_vertices"], fam.get("n_profile")
                )
        if family.mode != self.config[CONF_MODE]:
            raise SweepoutError(f"Builder produced a {family.mode} family for a {self.config[CONF_MODE]} scenario")
        validation = validate_family(domain, family)
        if not validation.passed:
            raise SweepoutError(f"Family fails validation: {', '.join(validation.failures)}")
        report = minmax_report(domain, family, refined=refined)
        self.data.update(
            {"domain": domain, "family": family, "seeds": seeds, "validation": validation, "initial": report}
        )
        self.store.family("initial_slices.jsonl", family)
        _LOGGER.debug("Updated build: m0=%.9g bM0=%.9g", report.m0, report.bM0)

    def _handle_tighten(self) -> None:
        """Pull the family tight and locate the critical slice."""
        params = TightenParams.from_dict(self.config[CONF_TIGHTEN])
        family, trace = pull_tight(self.domain, self.data["family"], params)
        self.data.update({"family": family, "trace": trace})
        self._update_critical()
        self.store.csv("trace.csv", trace.rows(), ["iter", "m0", "argmax_t", "residual", "moved"])
        _LOGGER.debug("Updated tighten: %s", self.data["report"].to_dict())

    def _handle_certify(self) -> None:
        """Search for eps-deformations at the critical slice and freeze them into the family.

        When the annulus tuple certifies and ``amin.ball`` is set, the ball of
        that radius around the centre of the critical slice is searched as
        well; a counterexample found there is frozen in at the argmax cube
        once per run.
        """
        cfg = self.config[CONF_AMIN]
        certificates: list[dict[str, Any]] = []
        freezes: list[dict[str, Any]] = []
        self.data.update({"certificates": certificates, "freezes": freezes, "certified_radius": None, "covering": None})
        if not cfg["enabled"]:
            return
        domain = self.domain
        budget = SearchBudget(cfg["steps"], cfg["starts"], self.config[CONF_SEED])
        for j in cfg["schedule"]:
            eps = 1.0 / j
            report = self.data["report"]
            critical = self.data["critical"]
            x = probe_point(critical)
            result = is_eps_almost_minimizing_in_annuli(domain, critical, x, cfg["radii"], eps, cfg["m"], budget)
            entry = {"j": j, "eps": eps, "t": list(report.argmax_t), **result.to_dict()}
            entry["replayed"] = [c.replay() for c in result.certificates if c.is_counterexample]
            certificates.append(entry)
            if result.certified:
                self.data["certified_radius"] = result.radius
                if cfg.get("ball") is None or freezes:
                    continue
                region = Ball(x, cfg["ball"])
                witness = is_eps_almost_minimizing(domain, AMQuery(critical, region, eps, cfg["m"], budget))
                entry["ball"] = {"region": region.to_dict(), "verdict": witness.verdict.value}
                if not witness.is_counterexample:
                    continue
            else:
                witness = result.certificates[0]
                region = result.regions[0]
            try:
                family, freeze = freeze_splice(
                    domain, self.data["family"], report.argmax_t, witness.family, region, enlarged_region(region), eps
                )
            except (NotGraphical, EstimateViolated) as err:
                _LOGGER.warning("Could not freeze the deformation at %s: %s", report.argmax_t, err)
                freezes.append({"t0": list(report.argmax_t), "eps": eps, "error": str(err), "passed": False})
                continue
            freezes.append(freeze.to_dict())
            self.data["family"] = family
            self._update_critical()
        depth = 1.0 / max(cfg["schedule"]) / 2 ** (cfg["m"] + 2)
        self.data["covering"] = self._cover_critical_set(depth)
        _LOGGER.debug("Updated certify: %d certificates, %d freezes", len(certificates), len(freezes))

    def _cover_critical_set(self, depth: float) -> dict[str, Any]:
        """Cover the parameters within ``depth`` of m0 by refined cubes carrying annulus tuples."""
        family: SweepoutFamily = self.data["family"]
        report = self.data["report"]
        m = family.k
        r1 = self.config[CONF_AMIN]["radii"][0]
        radii = [r1 / (2.0 * RADIUS_RATIO) ** l for l in range(omega(m))]
        points = np.array([family.parameter(i) for i in family.indices() if report.masses[i] >= report.m0 - depth])
        top = np.array(family.shape) - 1

        def assignment(center: np.ndarray) -> list:
            index = tuple(np.clip(np.rint(center / family.grid_step()).astype(int), 0, top))
            return make_annulus_tuple(self.domain, probe_point(family[index]), radii).sets

        try:
            covering = refine_covering(points.reshape(-1, m), self.config[CONF_COMB]["eta"], assignment, m)
        except CombinatorialError as err:
            _LOGGER.warning("Could not cover the critical set: %s", err)
            return {"points": len(points), "error": str(err), "passed": False}
        return {"points": len(points), **covering.to_dict(), "passed": True}

    def _handle_replace(self) -> None:
        """Replace the critical slice around its probe point."""
        cfg = self.config[CONF_PLATEAU]
        self.data["replacement"] = None
        if not cfg["enabled"]:
            return
        critical = self.data["critical"]
        x = probe_point(critical)
        if cfg["region"] == "ball":
            region = Ball(x, cfg["outer"])
        else:
            region = Annulus(x, cfg["inner"], cfg["outer"])
        replacement = construct_replacement(
            self.domain,
            critical,
            region,
            cfg["eps"],
            self.config[CONF_AMIN]["m"],
            spec_tol=cfg["spec_tol"],
            tol_replace=cfg["tol_replace"],
            certified=self.data.get("certified_radius"),
            restarts=cfg["restarts"],
            seed=self.config[CONF_SEED],
        )
        self.data["replacement"] = replacement
        _LOGGER.debug("Updated replace: %s", replacement.to_dict())

    def _handle_diagnose(self) -> None:
        """Run the varifold diagnostics and the oracle on the critical slice."""
        domain = self.domain
        cfg = self.config[CONF_DIAGNOSTICS]
        critical = self.data["critical"]
        mode = self.data["family"].mode
        cls = class_for_mode(mode)
        diagnostics: dict[str, Any] = {"boundary": boundary_report(domain, critical).to_dict()}
        if mode == CONSTRAINED and not domain.gamma.is_empty:
            diagnostics["trace"] = gamma_trace(domain, critical)
            diagnostics["wedge"] = wedge_check(domain, critical).to_dict()
            if domain.is_flat:
                inside, margin = convex_hull_check(domain, critical)
                diagnostics["convex_hull"] = {"inside": inside, "margin": margin}
        try:
            spectrum = second_variation_spectrum(domain, critical, cls, cfg["spectrum_count"])
            diagnostics["spectrum"] = spectrum.to_dict()
        except NotStationary as err:
            _LOGGER.warning("Skipping the spectrum: %s", err)
            diagnostics["spectrum"] = {"error": str(err)}

        varifold = to_varifold(domain, critical)
        probes = np.asarray(cfg["probes"], dtype=float) if cfg["probes"] else probe_point(critical)[None, :]
        densities = density_profiles(domain, varifold, probes, cfg["radii"], free_boundary=mode == UNCONSTRAINED)
        diagnostics["density"] = [d.to_dict() for d in densities]
        rows = [{"probe": i, **row} for i, d in enumerate(densities) for row in d.rows()]
        self.store.csv("density.csv", rows, ["probe", "rho", "f"])
        self.store.text(
            "plots/density.svg",
            line_plot({f"probe {i}": (d.radii, d.ratios) for i, d in enumerate(densities)}, "Density ratios", "rho", "f", log_x=True),
        )

        seeds = self.data.get("seeds")
        gaps = []
        if seeds is not None and cfg["gap_samples"] > 0:
            for k, seed in enumerate(seeds):
                if seed.is_mesh and seed.profile is not None and np.any(seed.profile[:, 0] <= 0.0):
                    continue
                mass = slice_mass(domain, seed)
                try:
                    table = local_min_gap(
                        domain, seed, [e * mass for e in cfg["gap_eps"]], cfg["gap_samples"], self.config[CONF_SEED]
                    )
                except (NotStable, NotStationary) as err:
                    _LOGGER.warning("Skipping the gap table of seed %d: %s", k, err)
                    continue
                gaps.append({"seed": k, "passed": table.passed, "margin": table.margin, "rows": table.rows()})
        diagnostics["gaps"] = gaps

        if self.scenario is not None and cfg["oracle"]:
            diagnostics["oracle"] = self.scenario.oracle(domain, seeds)
        self.data["diagnostics"] = diagnostics
        _LOGGER.debug("Updated diagnose: %s", sorted(diagnostics))

    # -- helpers --------------------------------------------------------------

    def _update_critical(self) -> None:
        family: SweepoutFamily = self.data["family"]
        report = minmax_report(self.domain, family)
        critical = family[report.argmax_t]
        residual = stationarity_residual(self.domain, critical, class_for_mode(family.mode))
        self.data.update({"report": report, "critical": critical, "residual": residual})

    def _assertions(self) -> list[Assertion]:
        expect = self.config["expect"]
        report = self.data["report"]
        diagnostics = self.data.get("diagnostics", {})
        out: list[Assertion] = []
        if "m0" in expect:
            target = expect["m0"]
            out.append(
                Assertion("m0", abs(report.m0 - target) <= expect["m0_rtol"] * abs(target), report.m0, target)
            )
        oracle = diagnostics.get("oracle")
        if oracle and "oracle_rtol" in expect:
            target = oracle["value"]
            out.append(
                Assertion(
                    "oracle",
                    abs(report.m0 - target) <= expect["oracle_rtol"] * abs(target),
                    report.m0,
                    target,
                    oracle["name"],
                )
            )
        if "max_orthogonality_defect" in expect:
            value = diagnostics["boundary"]["orthogonality_defect"]
            out.append(Assertion("orthogonality", value < expect["max_orthogonality_defect"], value, expect["max_orthogonality_defect"]))
        if "min_index" in expect:
            index = diagnostics.get("spectrum", {}).get("index")
            out.append(
                Assertion("index", index is not None and index >= expect["min_index"], index, expect["min_index"])
            )
        if "max_residual" in expect:
            # relative to m0 / diam(M), like the stopping rule of the pull-tight flow
            target = expect["max_residual"] * report.m0 / self.domain.diameter
            out.append(Assertion("residual", self.data["residual"] < target, self.data["residual"], target))
        if expect["above_boundary"]:
            out.append(Assertion("above_boundary", report.passes_condition, report.m0, report.bM0))
        trace = diagnostics.get("trace")
        if trace is not None:
            out.append(Assertion("trace", trace["passed"], trace["distance"], self.domain.tol_bdry))
        replacement = self.data.get("replacement")
        if replacement is not None:
            failed = sorted(name for name, ok in replacement.checks.items() if not ok)
            out.append(
                Assertion(
                    "replacement",
                    replacement.passed,
                    replacement.mass_delta,
                    replacement.tol_replace * replacement.mass_before,
                    ", ".join(failed),
                )
            )
        if expect["wedge"] and "wedge" in diagnostics:
            out.append(Assertion("wedge", diagnostics["wedge"]["passed"], diagnostics["wedge"]["margin"], 0.0))
        freezes = self.data.get("freezes", [])
        if freezes:
            failed = sum(1 for f in freezes if not f["passed"])
            out.append(Assertion("freezing", failed == 0, float(failed), 0.0, f"{len(freezes)} splices"))
        covering = self.data.get("covering")
        if covering is not None:
            bound = 2.0 ** self.data["family"].k
            out.append(Assertion("covering", covering["passed"], covering.get("max_overlap"), bound, covering.get("error", "")))
        return out

    def _report(self) -> RunReport:
        domain = self.domain
        family: SweepoutFamily = self.data["family"]
        report = self.data["report"]
        masses = report.masses

        self.store.family("slices.jsonl", family)
        self.store.csv("profile.csv", mass_profile_rows(family, masses))
        trace = self.data.get("trace")
        m0_trace = list(trace.m0) if trace is not None else [report.m0]
        if family.k == 1:
            t = np.linspace(0.0, 1.0, family.size)
            initial = self.data["initial"].masses
            self.store.text(
                "plots/profile.svg",
                line_plot({"initial": (t, initial), "tightened": (t, masses)}, "Mass profile"),
            )
        self.store.text("plots/trace.svg", line_plot({"m0": (range(len(m0_trace)), m0_trace)}, "Min-max value", "iteration", "m0"))
        overlay = {"critical": self.data["critical"]}
        if self.data.get("seeds"):
            overlay.update({f"seed {k}": s for k, s in enumerate(self.data["seeds"])})
        replacement = self.data.get("replacement")
        if replacement is not None:
            overlay["replacement"] = replacement.slice
        self.store.text("plots/critical.svg", curve_overlay(domain, overlay, "Critical slice"))
        if replacement is not None:
            self.store.json("replacement_slice.json", replacement.slice.to_dict())
        if self.data.get("covering") is not None:
            self.store.json("covering.json", self.data["covering"])

        assertions = self._assertions()
        critical = {
            "t": list(report.argmax_t),
            "mass": report.m0,
            "residual": self.data["residual"],
            "minmax": report.to_dict(),
            "initial": self.data["initial"].to_dict(),
            "validation": self.data["validation"].to_dict(),
        }
        return RunReport(
            name=self.config[CONF_NAME],
            criterion=self.scenario.criterion if self.scenario is not None else "",
            m0_trace=m0_trace,
            critical=critical,
            certificates=self.data.get("certificates", []),
            freezes=self.data.get("freezes", []),
            replacement=None if replacement is None else replacement.to_dict(),
            diagnostics=self.data.get("diagnostics", {}),
            assertions=assertions,
            timings=dict(self.timings),
            config=self.config,
            artifacts=dict(self.store.hashes),
        )


def run_scenario(config: dict[str, Any], out_dir: str | Path | None = None) -> RunReport:
    """Run a validated scenario config end to end."""
    return MinMaxCoordinator(config, out_dir).run()
