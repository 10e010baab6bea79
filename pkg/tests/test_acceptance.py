"""End-to-end checks at desk scale. Run with ``pytest -m slow``."""
from itertools import product
import random
import numpy as np
import numpy.testing as npt
import pytest
from scipy.spatial.distance import cdist

from qcmol.__main__ import main
from qcmol.bayesopt import BoConfig, optimize
from qcmol.chemmap import (
    backbone_carbon_count, circuit_to_molecule, molecule_to_circuit,
    row_sequences,
)
from qcmol.circuit import GatePolicy, SlotKind, sample_circuit, count_rz
from qcmol.manifest import manifest_path
from qcmol.molecule import (
    check_molecule, coulomb_matrix, coulomb_eigenvalues, gershgorin_radii,
    layout_2d,
)
from qcmol.simulator import kernel_value, gram_matrix
from qcmol.svm import train_svm, dual_objective, kkt_violation
from qcmol.utils import read_csv

pytestmark = pytest.mark.slow

RZ_ONLY = GatePolicy(0.3, 0.7, 0.0)


def per_qubit_kernel(grid, theta, x, y):
    angles = [[] for _ in range(grid.n_qubits)]
    t = iter(theta)
    for row, _, slot in grid.scan():
        if slot.kind == SlotKind.rz:
            angles[row].append(next(t))
    rv = 1.0
    for q in range(grid.n_qubits):
        a = np.array([np.exp(1j * x[q]), np.exp(-1j * x[q])]) / np.sqrt(2)
        b = np.array([np.exp(1j * y[q]), np.exp(-1j * y[q])]) / np.sqrt(2)
        for th in angles[q]:
            a = np.diag([np.exp(-1j * th * x[q]), np.exp(1j * th * x[q])]) @ a
            b = np.diag([np.exp(-1j * th * y[q]), np.exp(1j * th * y[q])]) @ b
        rv *= abs(np.vdot(b, a)) ** 2
    return rv


def test_kernel_matches_per_qubit_products():
    rng = np.random.default_rng(0)
    for i in range(1000):
        n = int(rng.integers(2, 6))
        grid = sample_circuit(n, int(rng.integers(0, 9)), RZ_ONLY, i)
        theta = rng.uniform(0, 2 * np.pi, count_rz(grid))
        x, y = rng.uniform(0, np.pi, (2, n))
        assert kernel_value(x, y, grid, theta) == \
            pytest.approx(per_qubit_kernel(grid, theta, x, y), abs=1e-10)
        assert kernel_value(x, x, grid, theta) == pytest.approx(1.0,
                                                                abs=1e-12)


def test_gram_validity():
    rng = np.random.default_rng(1)
    for seed in range(50):
        grid = sample_circuit(4, 5, GatePolicy(), seed)
        theta = rng.uniform(0, 2 * np.pi, count_rz(grid))
        xs = rng.uniform(0, np.pi, (50, 4))
        k = gram_matrix(xs, xs, grid, theta)
        npt.assert_allclose(k, k.T, atol=1e-12)
        npt.assert_allclose(np.diag(k), 1.0, atol=1e-12)
        assert np.linalg.eigvalsh(k).min() >= -1e-9


def test_mapping_roundtrip():
    rnd = random.Random(2)
    policy = GatePolicy(delta_max=4)
    for seed in range(1000):
        grid = sample_circuit(rnd.randint(4, 6), rnd.randint(1, 8), policy,
                              seed)
        mol = circuit_to_molecule(grid)
        assert check_molecule(mol) == []
        assert row_sequences(molecule_to_circuit(mol)) == row_sequences(grid)


def test_backbone_table():
    assert [backbone_carbon_count(n) for n in (4, 6, 8)] == [1, 2, 3]
    assert all(backbone_carbon_count(n) == n // 2 - 1
               for n in range(4, 21, 2))


def test_gershgorin_containment():
    policy = GatePolicy(delta_max=4)
    checked = 0
    seed = 0
    while checked < 200:
        grid = sample_circuit(4 + seed % 3, 1 + seed % 4, policy, seed)
        seed += 1
        mol = circuit_to_molecule(grid)
        if len(mol) > 40:
            continue
        m = coulomb_matrix(mol, layout_2d(mol))
        off = np.abs(m)
        np.fill_diagonal(off, 0.0)
        radii = off.sum(axis=1)
        assert gershgorin_radii(m) == (radii.min(), radii.max())
        for ev in coulomb_eigenvalues(m):
            assert np.any(np.abs(ev - np.diag(m)) <= radii * (1 + 1e-12))
        checked += 1


def brute_force_dual(gram, y, c):
    """Best feasible stationary point over every zero/bound/free pattern."""
    q = gram * np.outer(y, y)
    n = len(y)
    best = -np.inf
    for pattern in product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        alpha = np.where(pattern == 1, c, 0.0)
        free = np.flatnonzero(pattern == 2)
        if free.size:
            bound = np.flatnonzero(pattern != 2)
            m = np.zeros((free.size + 1, free.size + 1))
            m[:-1, :-1] = q[np.ix_(free, free)]
            m[:-1, -1] = y[free]
            m[-1, :-1] = y[free]
            rhs = np.concatenate([1.0 - q[np.ix_(free, bound)] @ alpha[bound],
                                  [-y[bound] @ alpha[bound]]])
            try:
                sol = np.linalg.solve(m, rhs)
            except np.linalg.LinAlgError:
                continue
            alpha[free] = sol[:-1]
        if alpha.min() < -1e-12 or alpha.max() > c + 1e-12 or \
                abs(alpha @ y) > 1e-9:
            continue
        best = max(best, alpha.sum() - 0.5 * alpha @ q @ alpha)
    return best


def test_svm_matches_brute_force():
    rng = np.random.default_rng(3)
    for i in range(100):
        n = int(rng.integers(4, 7))
        x = rng.normal(size=(n, 2))
        y = rng.choice([-1.0, 1.0], n)
        y[0], y[1] = 1.0, -1.0
        gram = np.exp(-cdist(x, x, "sqeuclidean"))
        c = float(rng.choice([0.3, 1.0, 5.0]))
        model = train_svm(gram, y, c=c, tol=1e-10)
        assert dual_objective(model, gram) == \
            pytest.approx(brute_force_dual(gram, y, c), abs=1e-6)
        assert kkt_violation(model, gram) < 1e-9


def test_bo_sanity():
    def bowl(theta):
        return -float((theta[0] - np.pi) ** 2)

    hits = 0
    for seed in range(20):
        result = optimize(bowl, 1, BoConfig(budget=20), seed)
        hits += abs(result.best_theta[0] - np.pi) <= 0.2
        inc = result.incumbents
        assert all(a <= b for a, b in zip(inc, inc[1:]))
    assert hits >= 18


def test_commands_rerun_bit_exact(tmp_path):
    circuits = tmp_path / "c.txt"
    described = tmp_path / "d.csv"
    evaluated = tmp_path / "e.csv"
    assert main(["generate", "--count", "8", "--seed", "5",
                 "--out", str(circuits)]) == 0
    assert main(["describe", "--circuits", str(circuits),
                 "--out", str(described)]) == 0
    assert main(["--no-cache", "evaluate", "--circuits", str(circuits),
                 "--train-size", "60", "--test-size", "60", "--bo-budget",
                 "3", "--bo-init", "2", "--out", str(evaluated)]) == 0
    for out in (circuits, described, evaluated):
        first = out.read_bytes()
        out.unlink()
        assert main(["rerun", str(manifest_path(out))]) == 0
        assert out.read_bytes() == first


def _ratio(path):
    for line in path.read_text().splitlines():
        if line.startswith("ratio: "):
            return float(line.split()[1])
    raise AssertionError(f"no ratio in {path}")


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    runs = {}
    for seed in (1, 2, 3):
        base = tmp_path_factory.mktemp(f"seed{seed}")
        common = ["--workers", "4", "--cache", str(base / "cache")]
        paths = {}
        for layers in (5, 8):
            circuits = base / f"l{layers}.txt"
            described = base / f"l{layers}_described.csv"
            evaluated = base / f"l{layers}_evaluated.csv"
            if layers == 5:
                gen = ["generate", "--count", "300", "--seed", str(seed)]
            else:
                gen = ["generate", "--extend-from", str(base / "l5.txt"),
                       "--layers", "8", "--seed", str(seed)]
            assert main(common + gen + ["--out", str(circuits)]) == 0
            assert main(common + ["describe", "--circuits", str(circuits),
                                  "--out", str(described)]) in (0, 2)
            assert main(common + ["evaluate", "--circuits", str(circuits),
                                  "--train-size", "200", "--test-size", "200",
                                  "--bo-budget", "10", "--seed", str(seed),
                                  "--out", str(evaluated)]) in (0, 2)
            paths[layers] = (described, evaluated)
        runs[seed] = (base, paths)
    return runs


def test_enrichment_trend(desk_runs):
    enriched = 0
    for seed, (base, paths) in desk_runs.items():
        described, evaluated = paths[5]
        assert len(read_csv(evaluated)) == 300
        out = base / "top.csv"
        assert main(["search", "--mode", "top", "--sample", "75",
                     "--described", str(described), "--evaluated",
                     str(evaluated), "--out", str(out)]) == 0
        enriched += _ratio(base / "top_enrichment.txt") >= 1.3
        report = base / "report.txt"
        assert main(["report", "--described", str(described), "--evaluated",
                     str(evaluated), "--out", str(report)]) == 0
        header = list(read_csv(base / "report_kde.csv")[0])
        assert "performant" in header and "underperforming" in header
    assert enriched >= 2


def test_depth_transfer_trend(desk_runs):
    agree = 0
    for seed, (base, paths) in desk_runs.items():
        out = base / "transfer.txt"
        assert main(["transfer",
                     "--described5", str(paths[5][0]),
                     "--evaluated5", str(paths[5][1]),
                     "--described8", str(paths[8][0]),
                     "--evaluated8", str(paths[8][1]),
                     "--out", str(out)]) == 0
        agree += "agree true" in out.read_text()
    assert agree >= 2
