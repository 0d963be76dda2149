import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lstm_qcbm import qcbm, quantum
from lstm_qcbm.errors import ConfigurationError
from lstm_qcbm.qcbm import QcbmConfig
from oracles import dense_circuit


def layout_gates(config, params):
    """The documented gate order, spelled out for the dense oracle."""
    n, it = config.n_qubits, iter(params)
    gates = []
    for _ in range(config.n_layers):
        gates += [("rx", (q,), next(it)) for q in range(n)]
        gates += [("rz", (q,), next(it)) for q in range(n)]
        gates += [("rxx", (q, q + 1), next(it)) for q in range(n - 1)]
        gates += [("rz", (q,), next(it)) for q in range(n)]
        gates += [("rx", (q,), next(it)) for q in range(n)]
    return gates


@pytest.mark.parametrize("n, layers, expected", [(3, 1, 14), (12, 3, 177), (2, 1, 9)])
def test_param_count(n, layers, expected):
    assert qcbm.param_count(QcbmConfig(n, layers)) == expected


def test_default_config():
    cfg = QcbmConfig()
    assert (cfg.n_qubits, cfg.n_layers) == (12, 3)


@pytest.mark.parametrize("n, layers", [(1, 1), (21, 1), (4, 0)])
def test_config_validation(n, layers):
    with pytest.raises(ConfigurationError):
        QcbmConfig(n, layers)


def test_wrong_parameter_length():
    with pytest.raises(ConfigurationError):
        qcbm.run_circuit(QcbmConfig(2, 1), np.zeros(8))


@pytest.mark.parametrize("n, layers", [(2, 1), (3, 2), (5, 3)])
def test_zero_params_identity(n, layers):
    cfg = QcbmConfig(n, layers)
    state = qcbm.run_circuit(cfg, np.zeros(qcbm.param_count(cfg)))
    np.testing.assert_array_equal(state.amplitudes, quantum.zero_state(n).amplitudes)
    dist = qcbm.qcbm_distribution(cfg, np.zeros(qcbm.param_count(cfg)))
    assert dist.probs[0] == 1.0


def test_point_masses_two_qubits():
    cfg = QcbmConfig(2, 1)
    # layout: rx0 rx1 | rz0 rz1 | rxx01 | rz0 rz1 | rx0 rx1
    cases = {0: {}, 1: {0: np.pi}, 2: {1: np.pi}, 3: {4: np.pi}}
    for index, settings_ in cases.items():
        params = np.zeros(9)
        for k, v in settings_.items():
            params[k] = v
        probs = qcbm.qcbm_distribution(cfg, params).probs
        assert probs[index] == pytest.approx(1.0, abs=1e-12)


def test_matches_dense_layout_oracle():
    rng = np.random.default_rng(0)
    for n, layers in [(2, 1), (3, 2)]:
        cfg = QcbmConfig(n, layers)
        params = rng.uniform(-np.pi, np.pi, qcbm.param_count(cfg))
        np.testing.assert_allclose(
            qcbm.run_circuit(cfg, params).amplitudes, dense_circuit(n, layout_gates(cfg, params)), atol=1e-10
        )


def test_distribution_matches_many_shots():
    cfg = QcbmConfig(3, 2)
    params = np.random.default_rng(1).uniform(-np.pi, np.pi, qcbm.param_count(cfg))
    dist = qcbm.qcbm_distribution(cfg, params)
    counts = qcbm.qcbm_sample(cfg, params, 10**6, np.random.default_rng(2))
    emp = np.zeros(8)
    for k, v in counts.items():
        emp[k] = v / 1e6
    assert 0.5 * np.abs(emp - dist.probs).sum() < 0.01


def test_expected_bits_examples():
    cfg = QcbmConfig(3, 1)
    assert np.all(qcbm.expected_bits(cfg, np.zeros(14)) == 0)
    params = np.zeros(14)
    params[1] = np.pi  # leading Rx on qubit 1
    np.testing.assert_allclose(qcbm.expected_bits(cfg, params), [0, 1, 0], atol=1e-12)
    params = np.zeros(14)
    params[:3] = np.pi / 2  # uniform superposition
    np.testing.assert_allclose(qcbm.expected_bits(cfg, params), [0.5, 0.5, 0.5], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 3))
def test_expected_bits_brute_force(seed, n, layers):
    cfg = QcbmConfig(n, layers)
    params = np.random.default_rng(seed).uniform(-np.pi, np.pi, qcbm.param_count(cfg))
    probs = qcbm.qcbm_distribution(cfg, params).probs
    brute = np.zeros(n)
    for x in range(2**n):
        for q in range(n):
            if (x >> q) & 1:
                brute[q] += probs[x]
    np.testing.assert_allclose(qcbm.expected_bits(cfg, params), brute, atol=1e-12)
    assert abs(probs.sum() - 1) < 1e-9


def test_bit_matrix_rows():
    m = qcbm.bit_matrix(3)
    np.testing.assert_array_equal(m[6], [0, 1, 1])
    np.testing.assert_array_equal(qcbm.bits_of(6, 3), [0, 1, 1])


def test_topk_coverage():
    dist = quantum.BornDistribution(2, np.array([0.1, 0.4, 0.2, 0.3]))
    assert qcbm.topk_coverage(dist, 2) == pytest.approx(0.7)
    assert qcbm.topk_coverage(dist, 20) == pytest.approx(1.0)


def test_init_is_near_uniform():
    cfg = QcbmConfig(8, 2)
    params = qcbm.init_params(cfg, np.random.default_rng(0))
    assert params.shape == (qcbm.param_count(cfg),)
    probs = qcbm.qcbm_distribution(cfg, params).probs
    assert probs.max() < 5 / 256 and probs.min() > 0.1 / 256
    # deterministic per seed
    np.testing.assert_array_equal(params, qcbm.init_params(cfg, np.random.default_rng(0)))


def test_save_load_roundtrip(tmp_path):
    cfg = QcbmConfig(4, 2)
    params = np.random.default_rng(3).normal(size=qcbm.param_count(cfg))
    qcbm.save_params(tmp_path / "q.bin", cfg, params)
    cfg2, params2 = qcbm.load_params(tmp_path / "q.bin")
    assert cfg2 == cfg
    np.testing.assert_array_equal(params2, params)
    lines = (tmp_path / "q.bin.txt").read_text().splitlines()
    assert lines[2] == f"param_count {params.size}"
    assert [float(v) for v in lines[3:]] == list(params)


def test_load_rejects_truncated(tmp_path):
    cfg = QcbmConfig(2, 1)
    qcbm.save_params(tmp_path / "q.bin", cfg, np.zeros(9))
    raw = (tmp_path / "q.bin").read_bytes()
    (tmp_path / "q.bin").write_bytes(raw[:-8])
    with pytest.raises(ConfigurationError):
        qcbm.load_params(tmp_path / "q.bin")
