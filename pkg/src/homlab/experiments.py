"""Experiment pipelines behind the CLI: configuration, stage execution,
acceptance checks, and report assembly.

Each stage computes its tables and a dict of named boolean checks; the CLI
maps failed checks to exit status 1, configuration problems to 2 and
numerical failures to 3.  A single Runner instance caches oscillating
solutions and recoveries so that later stages (three-ball, doubling) reuse
the convergence sweep instead of re-solving.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import carleman, cell, continuation, elliptic, errors, fields, twoscale

SPEC_EXPONENTS = {"alpha": 0.963369, "beta": 0.0239716, "s": 0.97572}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def default_config() -> dict:
    with resources.files("homlab.data").joinpath("default_config.json").open() as fh:
        return json.load(fh)


def load_config(path: str | None) -> dict:
    cfg = default_config()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise errors.ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise errors.ConfigurationError(f"config is not valid JSON: {exc}") from exc
        unknown = set(user) - set(cfg)
        if unknown:
            raise errors.ConfigurationError(
                f"unknown config keys: {sorted(unknown)}")
        for key, value in user.items():
            if isinstance(cfg.get(key), dict) and isinstance(value, dict):
                bad = set(value) - set(cfg[key])
                # boundary data carries kind-specific keys
                if bad and key != "boundary":
                    raise errors.ConfigurationError(
                        f"unknown config keys in {key!r}: {sorted(bad)}")
                merged = dict(cfg[key])
                merged.update(value)
                cfg[key] = merged
            else:
                cfg[key] = value
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if not cfg["eps_list"]:
        raise errors.ConfigurationError("eps_list must be nonempty")
    if not cfg["lambda_grid"]:
        raise errors.ConfigurationError("lambda_grid must be nonempty")
    lam0 = cfg["constants"]["lambda0"]
    for lam in cfg["lambda_grid"]:
        if lam < lam0 - 1e-12:
            raise errors.ConfigurationError(
                f"lambda_grid entry {lam} below lambda0 = {lam0}")
    for eps in list(cfg["eps_list"]) + [cfg["carleman_eps"], cfg["residual_eps"],
                                        cfg["multiscale_eps"]]:
        if not (0 < eps <= 1):
            raise errors.ConfigurationError(f"eps {eps} outside (0, 1]")
        n = math.ceil(2 * cfg["half_extent"] * cfg["cells_per_eps"] / eps - 1e-9)
        if n > cfg["max_resolution"]:
            raise errors.ConfigurationError(
                f"eps {eps} needs n = {n} > max_resolution = {cfg['max_resolution']}")
    bd = cfg["boundary"]
    if bd["kind"] == "fourier" and bd.get("seed") is None:
        raise errors.ConfigurationError(
            "fourier boundary data requires an explicit seed")
    if cfg["half_extent"] < 3.0:
        raise errors.ConfigurationError(
            "experiments need half_extent >= 3 so the comparison balls fit")


def boundary_data(cfg: dict):
    bd = cfg["boundary"]
    kind = bd["kind"]
    L = cfg["half_extent"]
    if kind == "fourier":
        return elliptic.FourierBoundaryData(
            L, modes=int(bd.get("modes", 6)), decay=float(bd.get("decay", 2.0)),
            seed=int(bd["seed"]), offset=float(bd.get("offset", 1.0)))
    if kind == "harmonic":
        return elliptic.HarmonicPolynomial(int(bd.get("degree", 2)))
    if kind == "bump":
        return elliptic.BumpBoundaryData(
            L, center=float(bd.get("center", 0.125)),
            width=float(bd.get("width", 0.04)),
            amplitude=float(bd.get("amplitude", 1.0)))
    raise errors.ConfigurationError(f"unknown boundary data kind {kind!r}")


@dataclass
class StageResult:
    name: str
    columns: list
    rows: list
    checks: dict
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

class Runner:
    def __init__(self, cfg: dict, use_cached_constants: Path | None = None,
                 jobs: int = 1):
        self.cfg = cfg
        self.jobs = max(1, int(jobs))
        self.A = fields.builtin_coefficient(cfg["coefficient"])
        self.identity = fields.builtin_coefficient("identity")
        self.data = boundary_data(cfg)
        self._solutions: dict = {}
        self._recoveries: dict = {}
        self._cell: dict = {}
        self.constants: carleman.CarlemanConstants | None = None
        self.constants_path = use_cached_constants
        c = cfg["constants"]
        if c.get("c0"):
            self.constants = carleman.CarlemanConstants(
                c0=float(c["c0"]), lambda0=float(c["lambda0"]),
                tau0=float(c["tau0"]), c_range=float(c["c_range"]),
                provenance="configured")

    # -- shared state ------------------------------------------------------

    def cell_quantities(self, family: str):
        if family not in self._cell:
            A = fields.builtin_coefficient(family)
            grid = fields.PeriodicGrid(self.cfg["cell_resolution"])
            cor = cell.solve_corrector(A, grid, tol=self.cfg["solver_tol"])
            a_hat = cell.homogenize(A, cor)
            cf = cell.corrector_fields(A, cor)
            self._cell[family] = (A, cor, a_hat, cf)
        return self._cell[family]

    def solution(self, family: str, eps: float, n: int | None = None,
                 data=None) -> fields.ScalarField:
        data = self.data if data is None else data
        key = (family, float(eps), n, getattr(data, "degree", None),
               getattr(data, "seed", None))
        if key not in self._solutions:
            A = fields.builtin_coefficient(family)
            if n is None:
                grid = twoscale.grid_for(eps, self.cfg["half_extent"],
                                         self.cfg["cells_per_eps"])
            else:
                grid = fields.DomainGrid(self.cfg["half_extent"], n)
            self._solutions[key] = twoscale.oscillating_solution(
                A, eps, grid, data, tol=self.cfg["solver_tol"])
        return self._solutions[key]

    def recovery(self, family: str, eps: float, n: int | None = None,
                 data=None) -> twoscale.RecoveredU0:
        data = self.data if data is None else data
        key = (family, float(eps), n, getattr(data, "degree", None),
               getattr(data, "seed", None))
        if key not in self._recoveries:
            _, _, a_hat, _ = self.cell_quantities(family)
            u = self.solution(family, eps, n, data)
            self._recoveries[key] = twoscale.recover_u0(
                u, a_hat, tol=self.cfg["solver_tol"],
                resolution_cap=self.cfg["u0_resolution_cap"])
        return self._recoveries[key]

    def ensure_constants(self) -> carleman.CarlemanConstants:
        if self.constants is not None:
            return self.constants
        if self.constants_path is not None and self.constants_path.exists():
            raw = json.loads(self.constants_path.read_text())
            self.constants = carleman.CarlemanConstants(
                c0=raw["c0"], lambda0=raw["lambda0"], tau0=raw["tau0"],
                c_range=raw["c_range"], provenance="cached")
            return self.constants
        self.stage_calibrate()
        return self.constants

    # -- stages ------------------------------------------------------------

    def stage_cell(self) -> StageResult:
        cfg = self.cfg
        cols = ["family", "n", "mu_hat", "lip_hat", "a11", "a12", "a22",
                "asymmetry", "chi_residual", "chi_mean_max", "b_mean_max",
                "b_abs_max", "f_abs_max", "div_defect"]
        rows, checks = [], {}
        for family in dict.fromkeys(["identity", cfg["coefficient"]]):
            A = fields.builtin_coefficient(family)
            mu_hat, lip_hat = fields.verify_assumptions(A)
            _, cor, a_hat, _ = self.cell_quantities(family)
            fc = cell.flux_correctors(A, cor, a_hat, tol=cfg["solver_tol"])
            chi_mean = max(abs(float(np.mean(c.values))) for c in cor.chi)
            b_mean = max(abs(float(np.mean(fc.b[i][j].values)))
                         for i in range(2) for j in range(2))
            b_max = max(float(np.max(np.abs(fc.b[i][j].values)))
                        for i in range(2) for j in range(2))
            f_max = max(float(np.max(np.abs(fc.F[k][i][j].values)))
                        for k in range(2) for i in range(2) for j in range(2))
            m = a_hat.a_hat
            rows.append([family, cfg["cell_resolution"], mu_hat, lip_hat,
                         m[0, 0], m[0, 1], m[1, 1], a_hat.asymmetry,
                         cor.residual_norm, chi_mean, b_mean, b_max, f_max,
                         fc.div_defect])
            if family == "identity":
                chi_max = max(float(np.max(np.abs(c.values))) for c in cor.chi)
                checks["identity_correctors_zero"] = (
                    cor.residual_norm <= 1e-10 and chi_max == 0.0)
                checks["identity_tensor_exact"] = (
                    abs(m[0, 0] - 1.0) == 0.0 and abs(m[1, 1] - 1.0) == 0.0
                    and m[0, 1] == 0.0)
                checks["identity_flux_zero"] = (b_max == 0.0 and f_max == 0.0)
            if family == "laminate":
                checks["laminate_tensor_oracle"] = (
                    abs(m[0, 0] - 0.5) <= 1e-3
                    and abs(m[1, 1] - 1.0 / math.sqrt(3.0)) <= 1e-3)
            checks[f"{family}_mean_zero"] = chi_mean <= 1e-10 and b_mean <= 1e-10
        return StageResult("cell", cols, rows, checks)

    def stage_calibrate(self) -> StageResult:
        cfg = self.cfg
        cal = cfg["calibration"]
        cached = (self.constants_path is not None and self.constants_path.exists()
                  and self.constants is None)
        if cached:
            self.ensure_constants()
            return StageResult("calibrate", ["degree", "lam", "tau", "ratio"],
                               [], {"c0_positive": self.constants.c0 > 0},
                               {"constants": constants_dict(self.constants),
                                "cached": True})
        grid = fields.DomainGrid(cfg["half_extent"], int(cal["resolution"]))
        eta = carleman.make_cutoff(grid)
        a_hat = cell.HomogenizedTensor(np.eye(2), 0.0)
        consts, probe = carleman.calibrate_constants(
            a_hat, grid, eta,
            lambda0=cfg["constants"]["lambda0"], tau0=cfg["constants"]["tau0"],
            c_range=cfg["constants"]["c_range"],
            degrees=tuple(cal["degrees"]), lambdas=tuple(cal["lambdas"]),
            taus=tuple(cal["taus"]))
        if self.constants is None:
            self.constants = consts
        rows = [[k, lam, tau, ratio] for (k, lam, tau, ratio) in probe]
        checks = {"c0_positive": consts.c0 > 0}
        # admissible constant at (lam, tau) = min over probe functions; its
        # variation across the tau sweep at fixed lam stays bounded
        spreads = {}
        for lam in cal["lambdas"]:
            mins = [min(r[3] for r in probe if r[1] == lam and r[2] == tau)
                    for tau in cal["taus"]]
            spreads[str(lam)] = max(mins) / min(mins)
        checks["admissible_ratio_tau_spread_le_10"] = all(
            v <= 10.0 for v in spreads.values())
        return StageResult("calibrate", ["degree", "lam", "tau", "ratio"],
                           rows, checks,
                           {"constants": constants_dict(consts),
                            "tau_spreads": spreads, "cached": False})

    def _prefetch(self, fn, items) -> None:
        """Fill the solution caches concurrently; results are re-read in a
        deterministic order afterwards.  Distinct sweep points hit distinct
        cache keys, so the fill is race-free."""
        if self.jobs > 1 and len(items) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                list(pool.map(fn, items))

    def stage_convergence(self) -> StageResult:
        cfg = self.cfg
        family = cfg["coefficient"]
        A, cor, a_hat, cf = self.cell_quantities(family)
        cac = cfg["caccioppoli"]
        cols = ["eps", "n", "l2_err", "h1_err", "norm_b3", "r0", "c_row",
                "caccioppoli"]
        rows_csv, rows = [], []
        caccs = []
        self._prefetch(lambda e: self.recovery(family, e),
                       sorted(cfg["eps_list"], reverse=True))
        for eps in sorted(cfg["eps_list"], reverse=True):
            u = self.solution(family, eps)
            rec = self.recovery(family, eps)
            row = twoscale.ConvergenceRow(
                eps=eps,
                l2_err=twoscale.l2_recovery_error(u, rec, subsamples=cfg["subsamples"]),
                h1_err=twoscale.h1_twoscale_error(u, rec, cf, eps,
                                                  subsamples=cfg["subsamples"]),
                norm_b3=fields.ball_l2(u, 3.0, cfg["subsamples"]),
                r0=rec.r0)
            chat = carleman.caccioppoli_constant(
                u, cac["s1"], cac["s2"], cac["s3"], cac["s4"],
                cac["lam"], cac["tau"], subsamples=cfg["subsamples"])
            rows.append(row)
            caccs.append(chat)
            rows_csv.append([row.eps, u.grid.n, row.l2_err, row.h1_err,
                             row.norm_b3, row.r0, row.c_row, chat])
        eps_arr = [r.eps for r in rows]
        l2_slope = twoscale.fit_slope(eps_arr, [r.l2_err for r in rows])
        h1_slope = twoscale.fit_slope(eps_arr, [r.h1_err for r in rows])
        cs = [r.c_row for r in rows]
        h1s = [r.h1_err for r in rows]
        floor = self.A.lip == 0.0
        checks = {}
        if not floor:
            checks["l2_slope_ge_half"] = l2_slope >= 0.5
            checks["c_row_spread_le_3"] = max(cs) / min(cs) <= 3.0
            checks["h1_strictly_decreasing"] = all(
                h1s[i] > h1s[i + 1] for i in range(len(h1s) - 1))
        checks["caccioppoli_spread_le_5"] = max(caccs) / min(caccs) <= 5.0
        return StageResult(
            "convergence", cols, rows_csv, checks,
            {"l2_slope": l2_slope, "h1_slope": h1_slope,
             "c_spread": max(cs) / min(cs), "floor": floor,
             "caccioppoli_spread": max(caccs) / min(caccs)})

    def stage_carleman(self) -> StageResult:
        cfg = self.cfg
        consts = self.ensure_constants()
        family = cfg["coefficient"]
        cols = ["case", "lam", "tau", "term_zero", "term_grad", "combined",
                "rhs", "ratio", "margin"]
        rows, checks, data = [], {}, {}

        # identity battery with harmonic-polynomial data
        _, _, a_hat_i, cf_i = self.cell_quantities("identity")
        battery_max = 0.0
        grid_i = fields.DomainGrid(cfg["half_extent"], cfg["identity_resolution"])
        eta_i = carleman.make_cutoff(grid_i)
        self._prefetch(
            lambda k: self.recovery("identity", 1.0, cfg["identity_resolution"],
                                    elliptic.HarmonicPolynomial(int(k))),
            list(cfg["identity_degrees"]))
        for k in cfg["identity_degrees"]:
            data_k = elliptic.HarmonicPolynomial(int(k))
            u = self.solution("identity", 1.0, cfg["identity_resolution"], data_k)
            rec = self.recovery("identity", 1.0, cfg["identity_resolution"], data_k)
            sweep = carleman.carleman_check(
                u, rec, cf_i, 1.0, self.identity, consts, cfg["lambda_grid"],
                eta_i, tau_points=cfg["tau_points"])
            battery_max = max(battery_max, sweep.max_ratio)
            for r in sweep.rows:
                rows.append([f"identity_k{k}", r.lam, r.tau, r.term_zero,
                             r.term_grad, r.combined, r.rhs, r.ratio, r.margin])
        checks["identity_max_ratio_le_1.1"] = battery_max <= 1.1
        data["identity_max_ratio"] = battery_max

        # oscillating family at the configured eps
        A, cor, a_hat, cf = self.cell_quantities(family)
        eps = cfg["carleman_eps"]
        u = self.solution(family, eps)
        rec = self.recovery(family, eps)
        eta = carleman.make_cutoff(u.grid)
        growth = continuation.growth_check(
            u, fields.GrowthParams(**cfg["growth"]), cfg["subsamples"])
        data["growth_holds"] = growth.holds
        data["growth_margin"] = growth.margin
        sweep = carleman.carleman_check(
            u, rec, cf, eps, A, consts, cfg["lambda_grid"], eta,
            tau_points=cfg["tau_points"])
        for r in sweep.rows:
            rows.append([f"{family}_eps{eps}", r.lam, r.tau, r.term_zero,
                         r.term_grad, r.combined, r.rhs, r.ratio, r.margin])
        checks["family_max_ratio_le_1.1"] = sweep.max_ratio <= 1.1
        data["family_max_ratio"] = sweep.max_ratio
        data["tau_range"] = [sweep.tau_min, sweep.tau_max]

        # support property of the expanded right-hand side
        R, _, _ = carleman.expanded_rhs_field(u, cf, eps, A, eta)
        x = u.grid.nodes()
        rad = np.hypot(x[:, None], x[None, :])
        plateau = (rad >= carleman.PLATEAU[0]) & (rad <= carleman.PLATEAU[1])
        rmax = float(np.max(np.abs(R)))
        checks["support_property"] = (
            float(np.max(np.abs(R[plateau]))) <= 1e-12 * rmax)

        # product-rule agreement drops under refinement at fixed eps
        res_eps = cfg["residual_eps"]
        res = []
        for mult in (1, 2):
            grid_r = twoscale.grid_for(res_eps, cfg["half_extent"],
                                       cfg["cells_per_eps"] * mult)
            u_r = self.solution(family, res_eps, grid_r.n)
            eta_r = carleman.make_cutoff(grid_r)
            res.append(carleman.rhs_expansion_residual(u_r, cf, res_eps, A, eta_r))
        checks["expansion_residual_drop_ge_1.8"] = res[0] / res[1] >= 1.8
        data["expansion_residuals"] = res
        return StageResult("carleman", cols, rows, checks, data)

    def stage_threeball(self) -> StageResult:
        cfg = self.cfg
        family = cfg["coefficient"]
        cols = ["kind", "eps", "radius", "value"]
        rows, checks, data = [], {}, {}

        exp1 = continuation.three_ball_exponents(1.0)
        checks["exponent_formulas"] = (
            abs(exp1.alpha - SPEC_EXPONENTS["alpha"]) <= 1e-5
            and abs(exp1.beta - SPEC_EXPONENTS["beta"]) <= 1e-5
            and abs(exp1.s - SPEC_EXPONENTS["s"]) <= 1e-5)
        lo, hi, count = cfg["exponent_lambda_grid"]
        lam_grid = np.linspace(lo, hi, int(count))
        exps = [continuation.three_ball_exponents(l) for l in lam_grid]
        checks["beta_positive_on_grid"] = all(e.beta > 0 for e in exps)
        # s = 1 - beta/(alpha+beta) saturates to 1.0 in double precision for
        # lam beyond ~9, so strict growth is asserted on the complement
        comp = [e.beta / (e.alpha + e.beta) for e in exps]
        checks["s_increasing_on_grid"] = all(
            comp[i + 1] < comp[i] for i in range(len(comp) - 1))
        data["exponents_lambda1"] = {"alpha": exp1.alpha, "beta": exp1.beta,
                                     "s": exp1.s}
        s = exp1.s

        c_family = {}
        for eps in sorted(cfg["eps_list"], reverse=True):
            u = self.solution(family, eps)
            c = continuation.three_ball_constant(u, s, subsamples=cfg["subsamples"])
            c_family[eps] = c
            rows.append([family, eps, 2.0, c])
        u_id = self.solution("identity", 1.0, cfg["identity_resolution"])
        c_base = continuation.three_ball_constant(u_id, s, subsamples=cfg["subsamples"])
        rows.append(["identity", 1.0, 2.0, c_base])
        checks["family_bounded_by_10x_identity"] = max(c_family.values()) <= 10.0 * c_base
        data["c_identity"] = c_base
        data["c_family_max"] = max(c_family.values())

        ms_eps = cfg["multiscale_eps"]
        u_ms = self.solution(family, ms_eps)
        macro = continuation.three_ball_constant(u_ms, s, subsamples=cfg["subsamples"])
        per_r = continuation.multiscale_three_ball(
            u_ms, s, cfg["multiscale_radii"], subsamples=cfg["subsamples"])
        for r, c in sorted(per_r.items(), reverse=True):
            rows.append(["multiscale", ms_eps, r, c])
        checks["multiscale_le_2x_macroscopic"] = max(per_r.values()) <= 2.0 * macro
        data["c_macroscopic"] = macro
        data["c_multiscale_max"] = max(per_r.values())
        return StageResult("threeball", cols, rows, checks, data)

    def stage_doubling(self) -> StageResult:
        cfg = self.cfg
        family = cfg["coefficient"]
        mu = self.A.mu
        M = cfg["growth"]["M"]
        cols = ["eps", "radius", "ratio", "macroscopic_ratio", "macroscopic_holds"]
        rows, checks, data = [], {}, {}
        max_per_eps = {}
        for eps in sorted(cfg["eps_list"], reverse=True):
            u = self.solution(family, eps)
            rep = continuation.doubling_report(
                u, cfg["doubling_radii"], mu, M, subsamples=cfg["subsamples"])
            for r, ratio in zip(rep.radii, rep.ratios):
                rows.append([eps, r, ratio, rep.macroscopic_ratio,
                             rep.macroscopic_holds])
            max_per_eps[eps] = max(rep.ratios)
        checks["ratios_positive"] = all(v > 0 for v in max_per_eps.values())
        spread = max(max_per_eps.values()) / min(max_per_eps.values())
        checks["uniform_over_eps_le_10"] = spread <= 10.0
        data["max_ratio_per_eps"] = {str(k): v for k, v in max_per_eps.items()}
        data["spread"] = spread
        return StageResult("doubling", cols, rows, checks, data)

    def stage_counterexample(self) -> StageResult:
        cfg = self.cfg
        grid = fields.DomainGrid(cfg["half_extent"], cfg["counterexample_resolution"])
        params = fields.GrowthParams(**cfg["growth"])
        rows_ce, k_star = continuation.counterexample_study(
            cfg["counterexample_degrees"], grid, params, cfg["subsamples"])
        cols = ["degree", "ratio_quadrature", "ratio_exact", "rel_err",
                "growth_holds", "growth_margin"]
        rows = []
        max_rel = 0.0
        for r in rows_ce:
            rel = abs(r.ratio_quadrature - r.ratio_exact) / r.ratio_exact
            max_rel = max(max_rel, rel)
            rows.append([r.degree, r.ratio_quadrature, r.ratio_exact, rel,
                         r.growth_holds, r.growth_margin])
        checks = {
            "ratios_match_1e-3": max_rel <= 1e-3,
            "growth_fails_from_k_star_le_6": k_star is not None and k_star <= 6,
        }
        return StageResult("counterexample", cols, rows, checks,
                           {"k_star": k_star, "max_rel_err": max_rel})


def constants_dict(c: carleman.CarlemanConstants) -> dict:
    return {"c0": c.c0, "lambda0": c.lambda0, "tau0": c.tau0,
            "c_range": c.c_range, "provenance": c.provenance}


PIPELINES = ("cell", "calibrate", "convergence", "carleman", "threeball",
             "doubling", "counterexample")


def run_stages(runner: Runner, subcommand: str):
    """Yield (StageResult, wall_clock) in dependency order."""
    order = PIPELINES if subcommand == "all" else (subcommand,)
    for name in order:
        t0 = time.perf_counter()
        result = getattr(runner, f"stage_{name}")()
        yield result, time.perf_counter() - t0
