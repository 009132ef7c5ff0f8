"""End-to-end acceptance gate: eight numbered criteria, one test each.

Every test prints a single verdict line of the form

    [criterion N] label: PASS/FAIL — detail

and then asserts it, so ``pytest -s tests/test_acceptance.py`` shows
the whole scorecard at once.

Criterion 1 currently fails, and the failure is real rather than a
harness artifact: the first bundled scenario draws the initial plant
state from a unit normal while the estimator starts at the origin, and
for roughly a third of the draws the open-loop plant trajectory itself
diverges before the horizon.  Those runs cannot converge no matter
what the estimator does, which caps the passing fraction below the
95% this gate demands.  The verdict line reports the split so the
shortfall stays visible instead of being tuned away.
"""

import time
from dataclasses import replace

import numpy as np

from _brute import argmin_selection, pi_table, union_of_passing, windowed_votes
from _toys import toy_bank, toy_plant, toy_scenario
from multiobserver import (
    SimulationDivergedError,
    ThresholdTable,
    attack_free_union,
    bank_index,
    build_bank,
    compute_all_pi,
    compute_thresholds,
    estimator_step,
    load_config,
    run_estimator,
    select_sigma,
    simulate,
    windowed_isolation,
)
from multiobserver.estimator import EstimatorStarvedError


def _verdict(num, label, ok, detail):
    line = f"[criterion {num}] {label}: {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    return line


def _full_run(cfg, bank, scen):
    traj = simulate(cfg.plant, scen, ceiling=cfg.ceiling)
    est = bank.run(traj.y, traj.u, cfg.initial_estimate(traj.x[0]))
    return traj, run_estimator(cfg.bank, cfg.bank.all_subsets, est, truth=traj.x)


def test_criterion_1_short_horizon_convergence(scenario_dir):
    cfg = load_config(scenario_dir / "example1.json")
    bank, _ = build_bank(cfg)
    passes = diverged = 0
    started = time.perf_counter()
    for seed in range(100):
        scen = replace(cfg.scenario, seed=seed)
        try:
            _, run = _full_run(cfg, bank, scen)
        except SimulationDivergedError:
            diverged += 1
            continue
        if float(run.e_norm[40:].max()) < 1e-2:
            passes += 1
    elapsed = time.perf_counter() - started
    ok = passes >= 95 and elapsed < 1.0
    line = _verdict(
        1,
        "short-horizon convergence, 3 sensors / 1 attacked",
        ok,
        f"{passes}/100 seeds below 1e-2 for k >= 40 (need 95); "
        f"{diverged} runs lost to plant divergence; batch {elapsed:.2f}s (limit 1s)",
    )
    assert ok, line


def test_criterion_2_reduced_bank_tail(scenario_dir):
    cfg = load_config(scenario_dir / "example2.json")
    bank, _ = build_bank(cfg)
    steps = cfg.scenario.horizon + 1
    start = steps - steps // 5  # final 20% of the run
    passes = 0
    for seed in range(100):
        _, run = _full_run(cfg, bank, replace(cfg.scenario, seed=seed))
        if float(run.e_norm[start:].max()) < 1e-2:
            passes += 1
    ok = passes >= 95
    line = _verdict(
        2,
        "reduced-order bank tail error",
        ok,
        f"{passes}/100 seeds with tail max below 1e-2 over k >= {start} (need 95)",
    )
    assert ok, line


def test_criterion_3_noise_gain_bound(scenario_dir):
    cfg = load_config(scenario_dir / "example3.json")
    bank, _ = build_bank(cfg)
    bound = cfg.estimator_iss.gamma1 * 0.1  # calibrated gain times the noise bound
    passes = 0
    started = time.perf_counter()
    for seed in range(100):
        _, run = _full_run(cfg, bank, replace(cfg.scenario, seed=seed))
        if float(run.e_norm[150:200].max()) <= bound:
            passes += 1
    elapsed = time.perf_counter() - started
    ok = passes >= 95 and elapsed < 5.0
    line = _verdict(
        3,
        "5-sensor circle bank within calibrated noise bound",
        ok,
        f"{passes}/100 seeds with tail max over k in [150,199] within {bound:.4f} "
        f"(need 95); batch {elapsed:.2f}s (limit 5s)",
    )
    assert ok, line


def test_criterion_4_attack_magnitude_independence(scenario_dir):
    cfg = load_config(scenario_dir / "example3.json")
    bank, _ = build_bank(cfg)
    scaled_gens = {
        s: replace(g, low=10.0 * g.low, high=10.0 * g.high)
        for s, g in cfg.scenario.attack_gens.items()
    }
    worst = 0.0
    pairs = 0
    for seed in range(20):
        base = replace(cfg.scenario, seed=seed)
        _, run_base = _full_run(cfg, bank, base)
        _, run_big = _full_run(cfg, bank, replace(base, attack_gens=scaled_gens))
        t_base = float(run_base.e_norm[150:200].max())
        t_big = float(run_big.e_norm[150:200].max())
        worst = max(worst, abs(t_big - t_base) / t_base)
        pairs += 1
    ok = pairs == 20 and worst <= 0.10
    line = _verdict(
        4,
        "tail error independent of attack magnitude",
        ok,
        f"scaling attacks x10 moved the tail max by at most {100 * worst:.3f}% "
        f"across {pairs} seed pairs (limit 10%)",
    )
    assert ok, line


def test_criterion_5_windowed_isolation(scenario_dir):
    cfg = load_config(scenario_dir / "example4.json")
    bank, _ = build_bank(cfg)
    iso = cfg.isolation
    started = time.perf_counter()
    m_bar = cfg.scenario.noise_bound if iso.m_bar is None else iso.m_bar
    d_bar = cfg.scenario.disturbance_bound if iso.d_bar is None else iso.d_bar
    thresholds = compute_thresholds(
        cfg.iss_models(), cfg.bank, m_bar, d_bar, iso.eps, k_star_override=iso.k_star
    )
    _, run = _full_run(cfg, bank, cfg.scenario)
    rep100 = windowed_isolation(run, thresholds, 100)
    rep200 = windowed_isolation(run, thresholds, 200)
    clean_scen = replace(cfg.scenario, attacked=frozenset(), attack_gens={})
    _, run_clean = _full_run(cfg, bank, clean_scen)
    rep_clean = windowed_isolation(run_clean, thresholds, 100)
    elapsed = time.perf_counter() - started

    hit100 = np.mean([w.isolated == (3,) for w in rep100.windows])
    hit200 = np.mean([w.isolated == (3,) for w in rep200.windows])
    empty = np.mean(
        [w.isolated == () and not w.no_quorum for w in rep_clean.windows]
    )
    ok = hit100 >= 0.70 and hit200 >= 0.80 and empty >= 0.90 and elapsed < 10.0
    line = _verdict(
        5,
        "windowed attack isolation",
        ok,
        f"sensor 3 isolated in {100 * hit100:.0f}% of N=100 windows (need 70) and "
        f"{100 * hit200:.0f}% of N=200 windows (need 80); attack-free run empty in "
        f"{100 * empty:.0f}% (need 90); {elapsed:.2f}s (limit 10s)",
    )
    assert ok, line


def test_criterion_6_bank_sizes():
    expected = {(3, 1): 6, (5, 2): 15, (4, 1): 10}
    got = {pq: len(bank_index(*pq).all_subsets) for pq in expected}
    ok = got == expected
    line = _verdict(
        6,
        "combinatorial bank sizes",
        ok,
        f"(p,q) -> observer count: {sorted(got.items())} (expected 6 / 15 / 10)",
    )
    assert ok, line


def test_criterion_7_brute_force_oracle():
    plant, idx, bank = toy_bank()
    scen = toy_scenario(horizon=99, noise_bound=0.05, seed=7)
    traj = simulate(plant, scen)
    est = bank.run(traj.y, np.zeros((100, plant.n_u)), np.zeros(plant.n))
    pos = {sub: j for j, sub in enumerate(bank.subsets)}

    frames, pi_steps = [], []
    for k in range(100):
        full = {sub: est[pos[sub], k] for sub in bank.subsets}
        pi_steps.append(compute_all_pi(full, idx))
        frames.append(estimator_step(full, idx, k=k))
    # thresholds at the per-subset median keep both outcomes of every
    # comparison populated
    pi_bar = {
        J: float(np.median([pi[J] for pi in pi_steps])) for J in idx.j_subsets
    }
    table = ThresholdTable(pi_bar=pi_bar, eps=0.0, k_bar_star=4)
    brute_bar = {J.members: v for J, v in pi_bar.items()}

    mismatches = scores = 0
    unions = {}
    for k in range(100):
        est_j = {sub.members: est[pos[sub], k] for sub in idx.j_subsets}
        est_s = {sub.members: est[pos[sub], k] for sub in idx.s_subsets}
        brute = pi_table(est_j, est_s, 3, 1)
        for J in idx.j_subsets:
            scores += 1
            mismatches += pi_steps[k][J] != brute[J.members]
        mismatches += frames[k].sigma.members != argmin_selection(brute)
        u = union_of_passing(brute, brute_bar)
        mismatches += attack_free_union(pi_steps[k], table) != u
        if k >= table.k_bar_star:
            unions[k] = u
    votes = windowed_votes(unions, 3, 1, table.k_bar_star, 7)
    report = windowed_isolation(frames, table, 7, bank=idx)
    mismatches += len(report.windows) != len(votes)
    for w, (k_start, k_end, counts, winner, isolated, no_quorum) in zip(
        report.windows, votes
    ):
        mismatches += (
            w.k_start,
            w.k_end,
            w.counts,
            w.winner,
            w.isolated,
            w.no_quorum,
        ) != (k_start, k_end, counts, winner, isolated, no_quorum)

    ok = mismatches == 0
    line = _verdict(
        7,
        "brute-force oracle equivalence",
        ok,
        f"{scores} deviation scores, 100 selections, 100 unions, and "
        f"{len(votes)} vote windows agree bit-for-bit ({mismatches} mismatches)",
    )
    assert ok, line


def test_criterion_8_invariant_battery(scenario_dir):
    cases = 1000
    rng = np.random.default_rng(2024)

    # selection invariants on random estimate banks (NaNs included)
    done = 0
    while done < cases:
        p = int(rng.integers(3, 6))
        q = int(rng.integers(1, (p - 1) // 2 + 1))
        n = int(rng.integers(1, 4))
        idx = bank_index(p, q)
        est = {sub: rng.normal(size=n) * 10.0 ** rng.integers(-2, 3) for sub in idx.all_subsets}
        if rng.random() < 0.1:
            victim = idx.all_subsets[int(rng.integers(0, len(idx.all_subsets)))]
            est[victim] = np.full(n, np.nan)
        try:
            frame = estimator_step(est, idx)
        except EstimatorStarvedError:
            continue
        assert all(v >= 0.0 for v in frame.pi.values())
        assert frame.pi[frame.sigma] == min(frame.pi.values())
        assert np.array_equal(frame.x_hat, est[frame.sigma])
        done += 1

    # attack support: the injected attack never leaves its declared support
    plant = toy_plant()
    for case in range(cases):
        attacked = (int(rng.integers(1, 4)),)
        traj = simulate(
            plant, toy_scenario(attacked=attacked, seed=case, horizon=2)
        )
        off = [i for i in range(3) if (i + 1) not in attacked]
        assert np.all(traj.a[:, off] == 0.0)

    # isolation cardinality: never more sensors accused than the budget
    from multiobserver.estimator import EstimatorFrame

    for case in range(cases):
        p = int(rng.integers(3, 6))
        q = int(rng.integers(1, (p - 1) // 2 + 1))
        idx = bank_index(p, q)
        table = ThresholdTable(
            pi_bar={J: 1.0 for J in idx.j_subsets}, eps=0.0, k_bar_star=0
        )
        frames = [
            EstimatorFrame(
                k=k,
                sigma=idx.j_subsets[0],
                x_hat=np.zeros(1),
                pi={J: float(rng.choice([0.5, 5.0])) for J in idx.j_subsets},
                estimates={},
            )
            for k in range(3)
        ]
        report = windowed_isolation(frames, table, 3, bank=idx)
        for w in report.windows:
            assert len(w.isolated) <= q
            if w.winner is not None:
                assert len(w.winner) >= p - q

    # reduced-order coordinate identity within 1e-8
    from multiobserver import SubsetIndex
    from multiobserver.errors import ConfigurationError
    from multiobserver.observers import ReducedStructure, build_reduced_observer

    done = 0
    while done < cases:
        n = int(rng.integers(2, 6))
        p = int(rng.integers(1, n))
        card = int(rng.integers(1, p + 1))
        A = rng.normal(size=(n, n))
        C = rng.normal(size=(p, n))
        members = tuple(
            sorted(rng.choice(np.arange(1, p + 1), size=card, replace=False))
        )
        L = rng.normal(size=(n - card, n))
        st = ReducedStructure(A=A, C=C, g=lambda x, u: np.zeros(n))
        try:
            obs = build_reduced_observer(st, SubsetIndex("J", members), L)
        except ConfigurationError:
            continue  # randomly singular completion, rejected by contract
        assert np.max(np.abs(obs.N @ obs.L + obs.M @ obs.C_J - np.eye(n))) < 1e-8
        done += 1

    # slope certificates for the bundled nonlinear scenarios
    slopes = []
    for name in ("example3", "example4"):
        _, rep = build_bank(load_config(scenario_dir / f"{name}.json"))
        assert rep.slope is not None and rep.slope.passed
        slopes.append(name)

    # determinism: the same seed reproduces a full run bit for bit
    cfg = load_config(scenario_dir / "example1.json")
    bank, _ = build_bank(cfg)
    t1, r1 = _full_run(cfg, bank, cfg.scenario)
    t2, r2 = _full_run(cfg, bank, cfg.scenario)
    assert np.array_equal(t1.x, t2.x) and np.array_equal(t1.y, t2.y)
    assert np.array_equal(r1.pi, r2.pi) and np.array_equal(r1.x_hat, r2.x_hat)

    line = _verdict(
        8,
        "invariant battery",
        True,
        f"4 randomized property families x {cases} cases, slope certificates for "
        f"{'/'.join(slopes)}, and bit-identical repeated runs",
    )
    assert line