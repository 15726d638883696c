"""One runner per CLI subcommand: config in, :class:`Report` out.

Every runner is deterministic given ``(config, seed)``.  Auxiliary random
draws (random sets, spans, integrands) use keyed streams distinct from the
white-noise streams.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np
from scipy import linalg

from . import config as C
from .errors import ConfigError, KernelNoiseError
from .features import (
    SignedFunctional,
    Atom,
    adjointness_gap,
    brownian_features,
    continuous_frame_check,
    delta_expansion,
    factor_through_white_noise,
    functional_pairing,
    indicator_factor,
    kernel_metric,
    measure_rkhs_norm,
    parseval_frame_check,
    projection_matrix,
    rank_one_factor,
    szego_features,
    szego_monomial_frame,
    transform_J,
    transform_L,
)
from .ito import (
    build_isometry_pair,
    fourier_process_covariance,
    gaussian_characteristic_function,
    grid_fourier_transform,
    isometry_mc,
    ito_lemma_residual,
    polarization_mc,
    quadratic_variation,
    schwartz_transform_check,
)
from .kernels import (
    Span,
    TabulatedKernel,
    build_kernel,
    certify_dominance,
    dominance_from_grams,
    gram,
    membership_constant,
    psd_certificate,
    random_psd_pair,
    rkhs_inner,
)
from .markov import TransitionKernel, interpolate_n, iterate, two_step_sum
from .measure_space import GridMeasure, GroundSpace, MeasurableSet, Partition, dyadic_ladder, intersect, measure_of
from .report import Report, Row
from .stats import MCEstimate, ratio_se
from .white_noise import (
    characteristic_functional,
    haar_basis,
    indicator_basis,
    keyed_rng,
    kl_mc_covariance,
    kl_weights,
    mc_covariances,
    sample_fields,
)

# stream ids for auxiliary randomness
_AUX = 101

DEFAULT_SPACE = {"kind": "interval", "a": 0.0, "b": 1.0, "cells": 1024}


def _rng(seed, *key):
    return keyed_rng(seed, _AUX, *key)


def random_sets(space: GroundSpace, rng, count: int) -> list[MeasurableSet]:
    """Mix of random cell runs and random scattered subsets."""
    n = space.cell_count
    out = []
    for k in range(count):
        if k % 2 == 0:
            lo, hi = np.sort(rng.integers(0, n + 1, size=2))
            hi = max(hi, lo + 1) if lo < n else n
            lo = min(lo, hi - 1)
            out.append(space.range_set(int(lo), int(hi)))
        else:
            size = int(rng.integers(1, n + 1))
            out.append(space.cells(rng.choice(n, size=size, replace=False)))
    return out


def _points_for(family, rng, size, kernel, space):
    if family in ("set_intersection", "mass_product"):
        return random_sets(space, rng, size)
    if family == "szego":
        return rng.uniform(-0.95, 0.95, size)
    if family == "brownian_min":
        return rng.uniform(0.0, 1.0, size)
    if family == "gaussian_rbf":
        return rng.uniform(-3.0, 3.0, size)
    if family == "tabulated":
        size = min(size, len(kernel.index))
        idx = rng.choice(len(kernel.index), size=size, replace=False)
        return [kernel.index[i] for i in idx]
    raise ConfigError(f"config.kernels: no random sampler for {family!r}")


BUILTIN_KERNELS = [{"family": f} for f in
                   ("set_intersection", "mass_product", "brownian_min", "szego", "gaussian_rbf")]


def run_psd_check(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"psd_rel": 1e-10, "anchor": 1e-12})
    space, mu = C.space_and_measure(cfg, DEFAULT_SPACE)
    rep = Report("psd-check")
    certs = []
    for ki, kspec in enumerate(cfg.get("kernels", BUILTIN_KERNELS)):
        K = build_kernel(kspec, mu)
        fam = kspec["family"]
        samples = []
        if "random_samples" in cfg:
            rs = cfg["random_samples"]
            rng = _rng(seed, 1, ki)
            for _ in range(rs.get("count", 20)):
                size = int(rng.integers(2, rs.get("max_size", 64) + 1))
                samples.append(_points_for(fam, rng, size, K, space))
        elif K.index_kind == "set":
            samples.append(C.build_sets(space, cfg.get("sets", ["all"])))
        elif fam == "tabulated":
            samples.append(list(K.index))
        else:
            samples.append(cfg.get("points", []))
        for si, pts in enumerate(samples):
            G = gram(K, pts)
            cert = psd_certificate(G, tol["psd_rel"])
            rep.add(Row.small(f"{fam}.sample{si}.negative_part", -cert.min_eigenvalue, cert.tolerance))
            certs.append({"kernel": K.describe(), "points": len(pts),
                          "min_eigenvalue": cert.min_eigenvalue, "tolerance": cert.tolerance})
    anchor = cfg.get("brownian_anchor")
    if anchor:
        rep.add(brownian_anchor_row(anchor.get("cells", 1000), tol["anchor"]))
    rep.extra["certificates"] = certs
    rep.extra["tolerances"] = tol
    return rep


def brownian_anchor_row(cells: int, tol: float) -> Row:
    """Set-intersection Gram of the sets [0, t) under Lebesgue against min(s, t)."""
    space = GroundSpace.interval(0.0, 1.0, cells)
    mu = GridMeasure.lebesgue(space)
    sets = [space.range_set(0, k) for k in range(1, cells + 1)]
    t = space.edges[1:]
    G = build_kernel({"family": "set_intersection"}, mu).matrix(sets, sets)
    err = float(np.abs(G - np.minimum.outer(t, t)).max())
    return Row.check(f"brownian_anchor.cells{cells}.max_abs_err", 0.0, err, tol)


def run_rkhs_norm(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"expected": 1e-6, "final": 1e-10, "monotone_rel": 1e-12,
                             "rank_tol": 1e-10})
    rep = Report("rkhs-norm")
    if "phi" in cfg:
        space, mu = C.space_and_measure(cfg, DEFAULT_SPACE)
        phi = C.build_function(cfg["phi"], space.representatives)
        norms = measure_rkhs_norm(phi, mu, dyadic_ladder(space.full()), tol["rank_tol"])
        target = mu.norm(phi)
        for k in range(1, len(norms)):
            rep.add(Row.small(f"level{k}.monotone_drop", norms[k - 1] - norms[k],
                              tol["monotone_rel"] * target))
        rep.add(Row.check("final_vs_L2_norm", target, norms[-1], tol["final"]))
        rep.extra["norms"] = norms
        return rep

    space, mu = (C.space_and_measure(cfg) if "space" in cfg else (None, None))
    K = build_kernel(cfg["kernel"], mu)
    pts = cfg.get("points", [])
    psi_spec = cfg.get("psi", {})
    x = np.asarray(pts, dtype=float)
    if "values" in psi_spec:
        psi = np.asarray(psi_spec["values"], dtype=float)
    elif "section" in psi_spec:
        psi = K.matrix(list(pts), [psi_spec["section"]])[:, 0]
    else:
        psi = x ** psi_spec.get("monomial", 1)
    sizes = range(1, len(pts) + 1) if cfg.get("nested", True) else [len(pts)]
    consts = []
    for m in sizes:
        try:
            consts.append(membership_constant(psi[:m], gram(K, pts[:m]), tol["rank_tol"]))
        except KernelNoiseError as exc:
            rep.add(Row.failed(f"prefix{m}", str(exc)))
            return rep
    for k in range(1, len(consts)):
        rep.add(Row.small(f"prefix{k + 1}.monotone_drop", consts[k - 1] - consts[k],
                          tol["monotone_rel"] * max(consts[-1], 1.0)))
    if "expected" in cfg:
        rep.add(Row.check("final_vs_expected", cfg["expected"], consts[-1], tol["expected"]))
    rep.extra["constants"] = consts
    return rep


def _dominance_rows(rep, name, G1, G2, tol, expected=None):
    Cst = dominance_from_grams(G1, G2, tol["rank_tol"])
    at_c, at_shrunk = certify_dominance(G1, G2, Cst, tol["psd_rel"])
    rep.add(Row.small(f"{name}.psd_at_C.negative_part", -at_c.min_eigenvalue, at_c.tolerance))
    rep.add(Row.at_most(f"{name}.fails_at_0.9C.min_eig_excess", at_shrunk.min_eigenvalue,
                        -at_shrunk.tolerance))
    A2 = G2.entries if hasattr(G2, "entries") else G2
    A1 = G1.entries if hasattr(G1, "entries") else G1
    if np.linalg.eigvalsh(A2)[0] > tol["rank_tol"] * np.trace(A2):
        oracle = float(linalg.eigh(A1, A2, eigvals_only=True)[-1])
        rep.add(Row.check(f"{name}.vs_generalized_eig", oracle, Cst, tol["oracle_rel"] * max(oracle, 1.0)))
    if expected is not None:
        rep.add(Row.check(f"{name}.vs_expected", expected, Cst, tol["expected"]))
    return Cst


def run_dominance(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"psd_rel": 1e-10, "rank_tol": 1e-10, "oracle_rel": 1e-8,
                             "expected": 1e-8})
    rep = Report("dominance")
    consts = {}
    if "kernel1" in cfg:
        space, mu = C.space_and_measure(cfg, DEFAULT_SPACE)
        K1 = build_kernel(cfg["kernel1"], mu)
        K2 = build_kernel(cfg["kernel2"], mu)
        pts = C.build_sets(space, cfg["sets"]) if K2.index_kind == "set" else cfg.get("points", [])
        consts["configured"] = _dominance_rows(rep, "configured", gram(K1, pts), gram(K2, pts),
                                               tol, cfg.get("expected"))
    rt = cfg.get("random_tabulated")
    if rt:
        for k in range(rt.get("count", 2)):
            rng = _rng(seed, 3, k)
            n = rt.get("size", 8)
            A, B = random_psd_pair(rng, n)
            labels = list(range(n))
            K1, K2 = TabulatedKernel(labels, A), TabulatedKernel(labels, B)
            consts[f"random{k}"] = _dominance_rows(rep, f"random{k}", gram(K1, labels),
                                                   gram(K2, labels), tol)
    rep.extra["constants"] = consts
    return rep


def _pairs(cfg, nsets, seed, key):
    if "pairs" in cfg:
        return [tuple(p) for p in cfg["pairs"]]
    rng = _rng(seed, *key)
    k = cfg.get("random_pairs", 10)
    return [tuple(int(v) for v in rng.choice(nsets, size=2, replace=nsets < 2)) for _ in range(k)]


def run_simulate(cfg, seed, threads=1) -> Report:
    space, mu = C.space_and_measure(cfg, DEFAULT_SPACE)
    if "sets" in cfg:
        sets = C.build_sets(space, cfg["sets"])
    else:
        sets = random_sets(space, _rng(seed, 4), 2 * cfg.get("random_pairs", 10))
    if "pairs" in cfg:
        pairs = [tuple(p) for p in cfg["pairs"]]
    elif "sets" in cfg:
        pairs = list(combinations(range(len(sets)), 2)) + [(i, i) for i in range(len(sets))]
    else:
        pairs = [(2 * k, 2 * k + 1) for k in range(len(sets) // 2)]
    rep = Report("simulate")
    if not cfg.get("skip_mc", False):
        ens = sample_fields(mu, cfg.get("replicas", 100000), seed, threads)
        ests = mc_covariances(ens, [(sets[i], sets[j]) for i, j in pairs])
        for (i, j), est in zip(pairs, ests):
            rep.add(Row.mc(f"pair{i}-{j}", est))
    kl = cfg.get("kl")
    if kl:
        tol = C.tolerances(cfg, {"parseval": 1e-10})
        onb = haar_basis(mu) if kl.get("basis", "haar") == "haar" else indicator_basis(mu)
        rep.add(Row.check("kl.basis_complete", 1.0, float(onb.complete), 0.0))
        ksets = random_sets(space, _rng(seed, 13), 2 * kl.get("random_pairs", 10))
        for k in range(len(ksets) // 2):
            A, B = ksets[2 * k], ksets[2 * k + 1]
            w = kl_weights(onb, A) @ kl_weights(onb, B)
            rep.add(Row.check(f"kl.parseval.pair{k}", measure_of(mu, intersect(A, B)), w,
                              tol["parseval"]))
            if kl.get("replicas"):
                rep.add(Row.mc(f"kl.mc.pair{k}",
                               kl_mc_covariance(onb, A, B, kl["replicas"], seed + k)))
    return rep


def random_integrands(s, rng, count):
    out = []
    for k in range(count):
        kind = k % 3
        if kind == 0:
            out.append(np.polynomial.polynomial.polyval(s, rng.normal(size=4)))
        elif kind == 1:
            w, ph = rng.uniform(1, 12), rng.uniform(0, 2 * np.pi)
            out.append(rng.uniform(0.5, 2) * np.sin(w * s + ph))
        else:
            lo, hi = np.sort(rng.uniform(s.min(), s.max(), 2))
            out.append(np.where((s >= lo) & (s <= hi), rng.normal(), 0.0) + rng.normal(scale=0.3))
    return out


def run_ito_isometry(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"operator": 1e-12})
    space, mu = C.space_and_measure(cfg, DEFAULT_SPACE)
    s = space.representatives
    rep = Report("ito-isometry")
    fs = [C.build_function(f, s) for f in cfg.get("integrands", [])]
    fs += random_integrands(s, _rng(seed, 5), cfg.get("random_integrands", 0))
    replicas = cfg.get("replicas", 100000)
    if fs:
        ens = sample_fields(mu, replicas, seed, threads)
        for k, est in enumerate(isometry_mc(ens, fs)):
            rep.add(Row.mc(f"isometry.f{k}", est))
        if len(fs) >= 2:
            rep.add(Row.mc("polarization.f0_f1", polarization_mc(ens, fs[0], fs[1])))
    chars = cfg.get("characteristic", [])
    if chars:
        ens = sample_fields(mu, replicas, seed + 1, threads)
        for k, fspec in enumerate(chars):
            est = characteristic_functional(ens, C.build_function(fspec, s))
            rep.add(Row.mc_complex(f"charfun.f{k}", est))
    ip = cfg.get("isometry_pair")
    if ip:
        dens = ip.get("density")
        pair = build_isometry_pair(ip.get("coarse", 64), ip.get("refinement", 8),
                                   (lambda x: C.build_function(dens, x)) if dens else None)
        for name, err in pair.invariant_errors().items():
            rep.add(Row.check(f"pair.{name}", 0.0, err, tol["operator"]))
        rng = _rng(seed, 6)
        hs = rng.standard_normal((ip.get("random_h", 100), pair.fine.space.cell_count))
        ratios = pair.contraction_ratios(hs)
        rep.add(Row.small("pair.contraction_excess", float(ratios.max()) - 1.0, tol["operator"]))
    return rep


def run_qv(cfg, seed, threads=1) -> Report:
    space, mu = C.space_and_measure(cfg, DEFAULT_SPACE)
    B = C.build_sets(space, [cfg.get("base", "all")])[0]
    pi0 = Partition.uniform(B, cfg.get("initial_blocks", 1))
    qv = quadratic_variation(mu, B, pi0, cfg.get("levels", 6), cfg.get("replicas", 100000),
                             seed, threads)
    rep = Report("qv")
    muB = measure_of(mu, B)
    prev = math.inf
    for L in qv.levels:
        rep.add(Row.mc(f"level{L.level}.mean_sum_sq", L.mean))
        rep.add(Row.mc(f"level{L.level}.var", L.var))
        rep.add(Row.at_most(f"level{L.level}.pred_var_bound", L.predicted_var,
                            2 * L.mesh * muB * (1 + 1e-12)))
        rep.add(Row.at_most(f"level{L.level}.pred_var_monotone", L.predicted_var, prev))
        prev = L.predicted_var
    rep.extra["levels"] = [{"level": L.level, "blocks": L.blocks, "mesh": L.mesh,
                            "predicted_var": L.predicted_var} for L in qv.levels]
    return rep


ITO_FUNCS = {
    "linear": (lambda x: 2.0 * x + 1.0, lambda x: 2.0 + 0 * x, lambda x: 0 * x),
    "square": (lambda x: x * x, lambda x: 2 * x, lambda x: 2.0 + 0 * x),
    "cos": (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
    "sin": (np.sin, np.cos, lambda x: -np.sin(x)),
    "exp": (np.exp, np.exp, np.exp),
}


def run_ito_lemma(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"exact": 1e-12})
    sp = dict(DEFAULT_SPACE, **cfg.get("space", {}))
    cases = cfg.get("cases") or [{"function": cfg.get("function", "square"),
                                  "cell_levels": cfg.get("cell_levels", [sp["cells"]]),
                                  "t": cfg.get("t", sp["b"])}]
    rep = Report("ito-lemma")
    for ci, case in enumerate(cases):
        name = case["function"]
        f, fp, fpp = ITO_FUNCS[name]
        t = case.get("t", sp["b"])
        prev = None
        for li, cells in enumerate(case.get("cell_levels", [sp["cells"]])):
            space = C.build_space(dict(sp, cells=cells))
            mu = C.build_measure(space, cfg.get("measure"))
            idx = space.interval_set(space.a, t).cells
            pred = 2.0 * math.fsum(mu.masses[idx] ** 2) if name == "square" else None
            res = ito_lemma_residual(mu, f, fp, fpp, t, cfg.get("replicas", 100000),
                                     seed + 100 * ci + li, threads, pred)
            tag = f"{name}.cells{cells}"
            if name == "linear":
                rep.add(Row.check(f"{tag}.max_abs_residual", 0.0, res.max_abs, tol["exact"]))
                continue
            rep.add(Row.mc(f"{tag}.mean", res.mean))
            if pred is not None:
                rep.add(Row.mc(f"{tag}.var", res.variance))
                if prev is not None:
                    r, se = ratio_se(res.variance, prev.variance)
                    rep.add(Row.mc(f"{tag}.var_ratio",
                                   MCEstimate(r, se, res.predicted_var / prev.predicted_var)))
                prev = res
    return rep


def run_fourier(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"closed_form": 1e-6})
    sp = cfg.get("space", {"kind": "interval", "a": -1.0, "b": 1.0, "cells": 4096})
    space = C.build_space(sp)
    mspec = cfg.get("measure", {"kind": "gaussian", "mean": 0.0, "sigma": 0.1})
    mu = C.build_measure(space, mspec)
    pairs = [tuple(p) for p in cfg.get("pairs", [[t, 0.0] for t in np.linspace(-2, 2, 6)])]
    replicas = cfg.get("replicas", 200000)
    rep = Report("fourier")
    ests = fourier_process_covariance(mu, pairs, replicas, seed, cfg.get("rescale", False), threads)
    for (t, s), est in zip(pairs, ests):
        rep.add(Row.mc_complex(f"t={t:g},s={s:g}", est))
    if mspec["kind"] == "gaussian":
        lags = np.array([t - s for t, s in pairs])
        g = grid_fourier_transform(mu, lags)
        cf = gaussian_characteristic_function(lags, mspec.get("sigma", 1.0), mspec.get("mean", 0.0))
        for lag, a, b in zip(lags, g, cf):
            rep.add(Row.check(f"quadrature.lag={lag:g}", 0.0, abs(a - b), tol["closed_form"]))
    if "shift" in cfg:
        c = cfg["shift"]
        shifted = fourier_process_covariance(mu, [(t + c, s + c) for t, s in pairs], replicas,
                                             seed + 1, cfg.get("rescale", False), threads)
        for (t, s), a, b in zip(pairs, ests, shifted):
            for part, se_a, se_b in (("re", a.se_real, b.se_real), ("im", a.se_imag, b.se_imag)):
                va = getattr(a.estimate, "real" if part == "re" else "imag")
                vb = getattr(b.estimate, "real" if part == "re" else "imag")
                se = math.hypot(se_a, se_b)
                rep.add(Row.mc(f"stationarity.t={t:g},s={s:g}.{part}", MCEstimate(vb, se, va)))
    sw = cfg.get("schwartz")
    if sw:
        lo, hi = sw.get("window", [-8.0, 8.0])
        x = np.linspace(lo, hi, sw.get("points", 2001))
        c0, w = sw.get("center", 0.0), sw.get("width", 1.0)
        chk = schwartz_transform_check(mu, lambda u: np.exp(-0.5 * ((u - c0) / w) ** 2), x,
                                       replicas, seed + 2, threads=threads)
        rep.add(Row.mc("schwartz.second_moment", chk.second_moment))
    return rep


def load_transition(cfg, seed) -> TransitionKernel:
    if "kernel_file" in cfg:
        return TransitionKernel.from_csv(cfg["kernel_file"])
    states = cfg.get("states", 64)
    return TransitionKernel.random(states, _rng(cfg.get("kernel_seed", seed), 8))


def run_markov(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"identity": 1e-12})
    P = load_transition(cfg, seed)
    x = cfg.get("x", 0)
    if "sets" in cfg:
        sets = C.build_sets(P.space, cfg["sets"])
        pairs = [tuple(p) for p in cfg.get("pairs", [[0, 1]])]
    else:
        rng = _rng(seed, 9)
        k = cfg.get("random_pairs", 3)
        sets = [P.space.cells(rng.choice(P.states, size=int(rng.integers(1, P.states)), replace=False))
                for _ in range(2 * k)]
        pairs = [(2 * i, 2 * i + 1) for i in range(k)]
    rep = Report("markov-interpolate")
    P2 = iterate(P, 2)
    kurt = {}
    for i, j in pairs:
        A, B = sets[i], sets[j]
        rep.add(Row.check(f"pair{i}-{j}.two_step_identity",
                          P2.prob(x, intersect(A, B)), two_step_sum(P, x, A, B), tol["identity"]))
    for n in cfg.get("n", [2, 3]):
        for i, j in pairs:
            res = interpolate_n(P, x, n, sets[i], sets[j], cfg.get("replicas", 40000),
                                seed + 1000 * n + i)
            rep.add(Row.mc(f"n{n}.pair{i}-{j}.cov", res.covariance))
            rep.add(Row.mc(f"n{n}.pair{i}-{j}.mean", res.mean_A))
            kurt[f"n{n}.pair{i}-{j}"] = res.kurtosis
    rep.extra["kurtosis_W_A"] = kurt
    rep.extra["mesh"] = float(P.rows[x].max())
    return rep


def _grid(spec, default):
    g = dict(default, **(spec or {}))
    return np.linspace(g["lo"], g["hi"], g["count"])


def run_frames(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"truncation": 1e-6, "norm": 1e-8, "reconstruction": 1e-6,
                             "continuous": 1e-8})
    from .kernels import BrownianMinKernel, SzegoKernel

    K = SzegoKernel()
    N = cfg.get("order", 60)
    xs = _grid(cfg.get("grid"), {"lo": -0.8, "hi": 0.8, "count": 161})
    frame = szego_monomial_frame(N, xs).certify(K, tol["truncation"])
    rep = Report("frames")
    rep.add(Row.check("szego.truncation_residual", 0.0, frame.certificate.residual, tol["truncation"]))
    tests = cfg.get("tests", [{"coeffs": [1.0], "points": [0.5]},
                              {"coeffs": [1.0, -1.0], "points": [0.5, -0.3]}])
    for k, sp in enumerate(tests):
        F = Span(sp["coeffs"], sp["points"])
        try:
            g3, g4 = parseval_frame_check(frame, K, F)
        except KernelNoiseError as exc:
            rep.add(Row.failed(f"test{k}", str(exc)))
            continue
        rep.add(Row.check(f"test{k}.norm_identity", 0.0, g3, tol["norm"]))
        rep.add(Row.check(f"test{k}.reconstruction", 0.0, g4, tol["reconstruction"]))
    cont = cfg.get("continuous")
    if cont:
        space, mu = C.space_and_measure(cont, DEFAULT_SPACE)
        times = cont.get("times") or list(space.edges[1::max(1, space.cell_count // 16)])
        KB = BrownianMinKernel()
        r = brownian_features(times, mu).certify(KB, tol["continuous"])
        rep.add(Row.check("brownian.factorization_residual", 0.0, r.certificate.residual,
                          tol["continuous"]))
        rng = _rng(seed, 10)
        for k in range(cont.get("random_spans", 3)):
            m = min(5, len(times))
            F = Span(rng.normal(size=m), [times[i] for i in rng.choice(len(times), m, replace=False)])
            g8, g9 = continuous_frame_check(KB, r, F)
            rep.add(Row.check(f"brownian.span{k}.norm_gap", 0.0, g8, tol["continuous"]))
            rep.add(Row.check(f"brownian.span{k}.reproduce_gap", 0.0, g9, tol["continuous"]))
    return rep


def run_transforms(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"isometry_rel": 1e-8, "adjoint": 1e-10, "projection": 1e-10,
                             "rank_tol": 1e-10})
    from .kernels import BrownianMinKernel, SzegoKernel

    fs = cfg.get("features", {"family": "szego"})
    if fs["family"] == "szego":
        pts = fs.get("points") or list(np.linspace(-0.8, 0.8, 17))
        r = szego_features(pts, fs.get("order", 60))
        K = SzegoKernel()
    else:
        space, mu = C.space_and_measure(fs, DEFAULT_SPACE)
        pts = fs.get("points") or list(space.edges[1::max(1, space.cell_count // 16)])
        r = brownian_features(pts, mu)
        K = BrownianMinKernel()
    mu = r.measure
    pts = list(r.index_points)
    rng = _rng(seed, 11)
    rep = Report("transforms")
    gaps = []
    for k in range(cfg.get("random_spans", 20)):
        m = int(rng.integers(1, len(pts) + 1))
        F = Span(rng.normal(size=m), [pts[i] for i in rng.choice(len(pts), m, replace=False)])
        lhs = rkhs_inner(F, F, K)
        g = transform_J(F, r)
        gaps.append(abs(lhs - mu.inner(g, g)) / max(lhs, 1e-300))
    rep.add(Row.check("J.isometry_max_rel_gap", 0.0, max(gaps), tol["isometry_rel"]))
    Q = projection_matrix(r, tol["rank_tol"])
    W = mu.masses[:, None] * Q
    adj, idem, fixed, selfadj, contr, member = [], [], [], [], [], []
    for k in range(cfg.get("random_h", 5)):
        h = rng.normal(size=mu.space.cell_count)
        hn = mu.norm(h)
        m = int(rng.integers(1, len(pts) + 1))
        F = Span(rng.normal(size=m), [pts[i] for i in rng.choice(len(pts), m, replace=False)])
        adj.append(adjointness_gap(F, h, r) / max(hn * math.sqrt(rkhs_inner(F, F, K)), 1e-300))
        Qh = Q @ h
        idem.append(mu.norm(Q @ Qh - Qh) / hn)
        contr.append(mu.norm(Qh) / hn)
        Lh = transform_L(h, r)
        try:
            member.append(membership_constant(Lh, gram(K, pts), tol["rank_tol"]) / hn ** 2)
        except KernelNoiseError:
            member.append(math.inf)
    selfadj = float(np.abs(W - W.T).max() / max(np.abs(W).max(), 1e-300))
    for x in pts:
        rx = r.rows([x])[0]
        fixed.append(mu.norm(Q @ rx - rx) / mu.norm(rx))
    rep.add(Row.check("adjointness_max_rel_gap", 0.0, max(adj), tol["adjoint"]))
    rep.add(Row.check("Q.fixed_point_max_rel_gap", 0.0, max(fixed), tol["projection"]))
    rep.add(Row.check("Q.idempotency_max_rel_gap", 0.0, max(idem), tol["projection"]))
    rep.add(Row.check("Q.self_adjoint_rel_gap", 0.0, selfadj, tol["projection"]))
    rep.add(Row.small("Q.contraction_excess", max(contr) - 1.0, tol["projection"]))
    rep.add(Row.small("L.membership_excess", max(member) - 1.0, tol["projection"]))
    return rep


def _functional(atoms):
    return SignedFunctional(tuple(Atom(a["at"], a.get("order", 0), a.get("weight", 1.0))
                                  for a in atoms))


def run_functionals(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"table_rel": 1e-9, "pairing": 1e-12, "metric": 1e-12})
    K = build_kernel(cfg.get("kernel", {"family": "szego"}))
    rep = Report("functionals")
    nmax = cfg.get("orthogonality_order", 6 if K.family == "szego" else None)
    if nmax is not None:
        for n in range(nmax + 1):
            for m in range(nmax + 1):
                v = functional_pairing(SignedFunctional.dirac(0.0, order=n), K,
                                       SignedFunctional.dirac(0.0, order=m))
                scale = math.factorial(n) * math.factorial(m)
                exact = float(math.factorial(n) ** 2) if n == m else 0.0
                rep.add(Row.check(f"table.{n},{m}", exact, v, tol["table_rel"] * scale))
    for k, pr in enumerate(cfg.get("pairings", [])):
        xi, eta = _functional(pr["xi"]), _functional(pr["eta"])
        try:
            v = functional_pairing(xi, K, eta)
        except KernelNoiseError as exc:
            rep.add(Row.failed(f"pairing{k}", str(exc)))
            continue
        if "expected" in pr:
            rep.add(Row.check(f"pairing{k}.vs_expected", pr["expected"], v, tol["pairing"]))
        if xi.max_order == 0 and eta.max_order == 0:
            a = np.array([t.weight for t in xi.atoms])
            b = np.array([t.weight for t in eta.atoms])
            G = K.matrix([t.location for t in xi.atoms], [t.location for t in eta.atoms])
            rep.add(Row.check(f"pairing{k}.vs_gram_form", float(a @ G @ b), v,
                              tol["pairing"] * max(1.0, abs(v))))
    de = cfg.get("delta_expansion")
    if de:
        x, y, N = de.get("x", 0.5), de.get("y", 0.3), de.get("order", 40)
        v = functional_pairing(delta_expansion(x, N), K, delta_expansion(y, N))
        exact = K(x, y)
        bound = abs(x * y) ** (N + 1) / (1 - abs(x * y))
        rep.add(Row.check("delta_expansion", exact, v, bound + 1e-12 * exact))
    mp = cfg.get("metric_points")
    if mp:
        worst_tri, worst_cont = -math.inf, -math.inf
        d = {(i, j): kernel_metric(K, mp[i], mp[j]) for i in range(len(mp)) for j in range(len(mp))}
        for i, j, k in combinations(range(len(mp)), 3):
            for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
                worst_tri = max(worst_tri, d[a, c] - d[a, b] - d[b, c])
        for i, j, k in combinations(range(len(mp)), 3):
            lhs = abs(K(mp[i], mp[k]) - K(mp[j], mp[k]))
            worst_cont = max(worst_cont, lhs - d[i, j] * math.sqrt(K(mp[k], mp[k])))
        rep.add(Row.small("metric.triangle_excess", worst_tri, tol["metric"]))
        rep.add(Row.small("metric.continuity_excess", worst_cont, tol["metric"]))
    return rep


def run_factorize(cfg, seed, threads=1) -> Report:
    tol = C.tolerances(cfg, {"residual": 1e-12})
    space, mu = C.space_and_measure(cfg, DEFAULT_SPACE)
    K = build_kernel(cfg.get("kernel", {"family": "set_intersection"}), mu)
    fac = cfg.get("factor", "indicator")
    G = indicator_factor if fac == "indicator" else rank_one_factor(mu)
    sets = (C.build_sets(space, cfg["sets"]) if "sets" in cfg
            else random_sets(space, _rng(seed, 12), 10))
    pairs = [tuple(p) for p in cfg.get("pairs", [[2 * k, 2 * k + 1] for k in range(len(sets) // 2)])]
    res = factor_through_white_noise(K, G, mu, sets, pairs, cfg.get("replicas", 100000), seed, threads)
    rep = Report("factorize")
    scale = max(1.0, mu.total ** 2)
    rep.add(Row.check("factor.residual", 0.0, res.residual, tol["residual"] * scale))
    for (i, j), est in zip(pairs, res.mc):
        rep.add(Row.mc(f"mc.pair{i}-{j}", est))
    return rep


RUNNERS = {
    "psd-check": run_psd_check,
    "rkhs-norm": run_rkhs_norm,
    "dominance": run_dominance,
    "simulate": run_simulate,
    "ito-isometry": run_ito_isometry,
    "qv": run_qv,
    "ito-lemma": run_ito_lemma,
    "fourier": run_fourier,
    "markov-interpolate": run_markov,
    "frames": run_frames,
    "transforms": run_transforms,
    "functionals": run_functionals,
    "factorize": run_factorize,
}


def run(cfg: dict, seed: int | None = None, threads: int = 1) -> Report:
    """Validate and execute one experiment config."""
    cfg = C.validate(cfg)
    seed = cfg.get("seed", 0) if seed is None else seed
    rep = RUNNERS[cfg["experiment"]](cfg, seed, threads)
    rep.meta.update({"seed": seed, "experiment": cfg["experiment"]})
    return rep
