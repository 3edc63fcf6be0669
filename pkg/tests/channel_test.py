"""
Test channel module functionality
Trace files, the clustered generator and the correlation primitives
"""

import numpy as np
import pytest

from utils.channel import (
    TRACE_HEADER,
    ChannelTensor,
    ClusterSpec,
    ClusterSpecError,
    MobilityMode,
    NonFiniteChannelError,
    SyntheticChannelGenerator,
    TraceFormatError,
    TraceTruncatedError,
    UndefinedCorrelationError,
    channel_gain,
    correlation_matrix,
    generate_synthetic,
    inter_user_correlation,
    load_trace,
    save_trace,
    trace_size,
)


def small_spec(seed=3, **kwargs):
    values = dict(num_users=8, users_per_cluster=(4, 4), seed=seed)
    values.update(kwargs)
    return ClusterSpec(**values)


def test_channel_tensor_shape_and_access():
    data = np.arange(2 * 3 * 4 * 5).reshape(2, 3, 4, 5).astype(complex)
    ch = ChannelTensor(data)
    assert (ch.num_rbs, ch.num_ttis, ch.num_antennas, ch.num_users) == (2, 3, 4, 5)
    assert ch.matrix(1, 2).shape == (4, 5)
    assert np.array_equal(ch.vector(1, 2, 3), data[1, 2, :, 3])
    assert ch.gains(0).shape == (2, 5)
    with pytest.raises(IndexError):
        ch.matrix(2, 0)
    with pytest.raises(IndexError):
        ch.vector(0, 0, 5)


def test_channel_tensor_rejects_nan_and_is_read_only():
    data = np.ones((1, 1, 2, 2), dtype=complex)
    data[0, 0, 0, 0] = np.nan
    with pytest.raises(NonFiniteChannelError):
        ChannelTensor(data)

    ch = ChannelTensor(np.ones((1, 1, 2, 2)))
    with pytest.raises(ValueError):
        ch.data[0, 0, 0, 0] = 2.0


def test_channel_window_uses_global_tti():
    ch = ChannelTensor(np.ones((2, 1, 3, 2)), first_tti=5)
    assert ch.matrix(0, 5).shape == (3, 2)
    with pytest.raises(IndexError):
        ch.matrix(0, 0)


def test_channel_gain_is_squared_norm():
    data = np.zeros((1, 1, 2, 1), dtype=complex)
    data[0, 0, :, 0] = [3.0, 4.0j]
    assert channel_gain(ChannelTensor(data), 0, 0, 0) == pytest.approx(25.0)


def test_correlation_of_identical_and_orthogonal_users():
    h = np.zeros((1, 1, 2, 3), dtype=complex)
    h[0, 0, :, 0] = [1.0, 0.0]
    h[0, 0, :, 1] = [2.0j, 0.0]
    h[0, 0, :, 2] = [0.0, 1.0]
    ch = ChannelTensor(h)
    assert inter_user_correlation(ch, 0, 0, 0, 1) == pytest.approx(1.0)
    assert inter_user_correlation(ch, 0, 0, 0, 2) == pytest.approx(0.0)
    assert inter_user_correlation(ch, 0, 0, 1, 0) == inter_user_correlation(ch, 0, 0, 0, 1)


def test_correlation_with_zero_vector_is_undefined():
    h = np.zeros((1, 1, 2, 2), dtype=complex)
    h[0, 0, :, 0] = [1.0, 1.0]
    ch = ChannelTensor(h)
    with pytest.raises(UndefinedCorrelationError):
        inter_user_correlation(ch, 0, 0, 0, 1)
    with pytest.raises(UndefinedCorrelationError):
        correlation_matrix(ch.matrix(0, 0))


def test_correlation_matrix_matches_pairwise():
    ch = generate_synthetic(small_spec(), 16, 2, 1)
    corr = correlation_matrix(ch.matrix(1, 0))
    assert corr.shape == (8, 8)
    assert np.allclose(np.diag(corr), 1.0)
    assert corr[2, 6] == pytest.approx(inter_user_correlation(ch, 1, 0, 2, 6))


def test_generator_is_deterministic_per_seed():
    a = generate_synthetic(small_spec(seed=11), 8, 3, 4)
    b = generate_synthetic(small_spec(seed=11), 8, 3, 4)
    c = generate_synthetic(small_spec(seed=12), 8, 3, 4)
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_streaming_matches_full_generation():
    spec = small_spec(seed=5)
    full = generate_synthetic(spec, 8, 2, 3, MobilityMode.slow(0.2))
    gen = SyntheticChannelGenerator(spec, 8, 2, MobilityMode.slow(0.2))
    for t, snap in enumerate(gen.stream(3)):
        assert snap.first_tti == t
        assert np.array_equal(snap.matrix(1, t), full.matrix(1, t))


def test_clusters_are_internally_correlated():
    spec = ClusterSpec(num_users=8, users_per_cluster=(4, 4), intra_cluster_corr=0.95,
                       inter_cluster_corr=0.05, seed=1)
    ch = generate_synthetic(spec, 64, 4, 1)
    corr = correlation_matrix(ch.at(0)).mean(axis=0)
    inside = np.mean([corr[i, j] for i in range(4) for j in range(4) if i != j])
    across = np.mean([corr[i, j] for i in range(4) for j in range(4, 8)])
    assert inside > 0.8
    assert across < 0.4


def test_zero_intra_correlation_gives_near_orthogonal_users():
    spec = ClusterSpec(num_users=4, users_per_cluster=(4,), intra_cluster_corr=0.0,
                       inter_cluster_corr=0.0, seed=2)
    ch = generate_synthetic(spec, 256, 1, 1)
    corr = correlation_matrix(ch.matrix(0, 0))
    off = corr[~np.eye(4, dtype=bool)]
    assert off.max() < 0.3


def test_static_channels_do_not_move_and_slow_ones_drift():
    static = generate_synthetic(small_spec(), 8, 1, 3)
    assert np.array_equal(static.matrix(0, 0), static.matrix(0, 2))
    slow = generate_synthetic(small_spec(), 8, 1, 3, MobilityMode.slow(0.1))
    assert not np.array_equal(slow.matrix(0, 0), slow.matrix(0, 2))


def test_fast_mobility_redraws_hopping_users():
    gen = SyntheticChannelGenerator(small_spec(), 8, 1, MobilityMode.fast(1.0))
    assert gen.cluster_of.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
    first, second = [snap.matrix(0, t) for t, snap in enumerate(gen.stream(2))]
    assert not np.allclose(first, second)
    assert set(gen.cluster_of.tolist()) <= {0, 1}

    still = generate_synthetic(small_spec(), 8, 1, 2, MobilityMode.fast(0.0))
    assert np.array_equal(still.matrix(0, 0), still.matrix(0, 1))


def test_nlos_clusters_are_weaker():
    spec = ClusterSpec(num_users=8, users_per_cluster=(4, 4), los_flags=(True, False), seed=4)
    ch = generate_synthetic(spec, 64, 8, 1)
    gains = ch.gains(0)
    assert gains[:, :4].mean() > gains[:, 4:].mean()


def test_frequency_flat_repeats_every_rb():
    ch = generate_synthetic(small_spec(frequency_flat=True), 4, 3, 1)
    assert np.array_equal(ch.matrix(0, 0), ch.matrix(2, 0))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(intra_cluster_corr=1.2),
        dict(inter_cluster_corr=-0.1),
        dict(intra_cluster_corr=0.3, inter_cluster_corr=0.3),
        dict(users_per_cluster=(4, 3)),
        dict(los_flags=(True,)),
    ],
)
def test_invalid_cluster_specs(kwargs):
    with pytest.raises(ClusterSpecError):
        generate_synthetic(small_spec(**kwargs), 4, 1, 1)


def test_cluster_membership_is_contiguous_blocks():
    spec = ClusterSpec(num_users=6, users_per_cluster=(1, 2, 3))
    assert spec.membership().tolist() == [0, 1, 1, 2, 2, 2]


def test_trace_round_trip_is_bit_exact(tmp_path):
    ch = generate_synthetic(small_spec(), 4, 3, 2)
    path = save_trace(ch, tmp_path / "h.mmch")
    loaded = load_trace(path)
    assert np.array_equal(loaded.data, ch.data)
    assert loaded.digest() == ch.digest()


def test_trace_size_arithmetic(tmp_path):
    assert TRACE_HEADER.size == 32
    assert trace_size(64, 16, 52, 10) == 32 + 64 * 16 * 52 * 10 * 8
    ch = generate_synthetic(small_spec(), 4, 2, 3)
    path = save_trace(ch, tmp_path / "h.mmch")
    assert path.stat().st_size == trace_size(4, 8, 2, 3)


def test_trace_with_bad_magic(tmp_path):
    path = tmp_path / "bad.mmch"
    path.write_bytes(b"XXXX" + bytes(28))
    with pytest.raises(TraceFormatError):
        load_trace(path)


def test_trace_with_short_payload(tmp_path):
    ch = generate_synthetic(small_spec(), 4, 2, 1)
    path = save_trace(ch, tmp_path / "h.mmch")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(TraceTruncatedError):
        load_trace(path)


def test_trace_with_nan_payload(tmp_path):
    path = tmp_path / "nan.mmch"
    header = TRACE_HEADER.pack(b"MMCH", 1, 1, 1, 1, 1, bytes(8))
    path.write_bytes(header + np.array([np.nan], dtype="<c8").tobytes())
    with pytest.raises(NonFiniteChannelError):
        load_trace(path)


def test_missing_trace_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_trace(tmp_path / "nope.mmch")
