import numpy as np
import pytest
from scipy.special import j0

from app.channels import (
    ChannelInstance,
    ScenarioSource,
    VehicularTrack,
    clarke_fading,
    doppler_hz,
    draw_instance,
    pathloss_db,
    shadowing_track,
    smallscale_sample,
)
from app.channels.pathloss import b1_breakpoint_m, shadowing_std_at
from app.errors import DimensionMismatch, NonPositiveDistance, OutOfRange, UnknownModel
from app.numerics import RandomStream
from app.schemas.scenario import KMH, ChannelModel, ScenarioConfig


def _config(model, **kwargs) -> ScenarioConfig:
    return ScenarioConfig(channel_model=model, **kwargs)


# --- small-scale fading ---------------------------------------------------------------------

def test_rayleigh_unit_power():
    h = smallscale_sample("rayleigh", 1000, 100, _config(ChannelModel.RAYLEIGH), RandomStream(1))
    assert h.shape == (100, 1000)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)


def test_rician_k_factor():
    cfg = _config(ChannelModel.RICIAN, rician_factor=3.0)
    h = smallscale_sample(ChannelModel.RICIAN, 1000, 100, cfg, RandomStream(2))
    los = np.abs(np.mean(h)) ** 2
    scattered = np.mean(np.abs(h - np.mean(h)) ** 2)
    assert los / scattered == pytest.approx(3.0, abs=0.05)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)


def test_nakagami_moments():
    cfg = _config(ChannelModel.NAKAGAMI, nakagami_m=5.0, nakagami_omega=2.0)
    h = smallscale_sample(ChannelModel.NAKAGAMI, 1000, 100, cfg, RandomStream(3))
    p = np.abs(h) ** 2
    assert np.mean(p) == pytest.approx(2.0, abs=0.04)
    assert np.mean(p ** 2) / np.mean(p) ** 2 == pytest.approx(1.2, abs=0.02)


def test_smallscale_rejects_pathloss_model():
    with pytest.raises(UnknownModel):
        smallscale_sample("large-scale", 2, 2, _config(ChannelModel.LARGE_SCALE), RandomStream(0))
    with pytest.raises(UnknownModel):
        smallscale_sample("weibull", 2, 2, _config(ChannelModel.RAYLEIGH), RandomStream(0))


# --- pathloss -------------------------------------------------------------------------------

def test_large_scale_pathloss_at_one_km():
    cfg = _config(ChannelModel.LARGE_SCALE, cell_radius_m=1000.0)
    assert pathloss_db("large-scale", 1000.0, cfg) == pytest.approx(128.1)


def test_large_scale_default_radius_bounds_distance():
    cfg = _config(ChannelModel.LARGE_SCALE)
    with pytest.raises(OutOfRange):
        pathloss_db("large-scale", 1000.0, cfg)


def test_indoor_pathloss():
    cfg = _config(ChannelModel.WINNER_INDOOR, carrier_frequency_hz=5e9, n_walls=1)
    assert pathloss_db("winner-indoor", 10.0, cfg) == pytest.approx(80.6)


def test_indoor_walls_add_five_db():
    one = _config(ChannelModel.WINNER_INDOOR, n_walls=1)
    two = _config(ChannelModel.WINNER_INDOOR, n_walls=2)
    assert pathloss_db("winner-indoor", 42.0, two) - pathloss_db("winner-indoor", 42.0, one) == pytest.approx(5.0)


def test_outdoor_two_slope():
    cfg = _config(ChannelModel.WINNER_OUTDOOR, carrier_frequency_hz=5e9)
    bp = b1_breakpoint_m(cfg.winner_b1, cfg.carrier_frequency_hz)
    assert bp == pytest.approx(4 * 9.0 * 0.5 * 5e9 / 3e8)
    near = pathloss_db("winner-outdoor", 150.0, cfg)
    assert near == pytest.approx(22.7 * np.log10(150.0) + 41.0)
    far = pathloss_db("winner-outdoor", 500.0, cfg)
    assert far == pytest.approx(40.0 * np.log10(500.0) + 9.45 - 17.3 * (np.log10(9.0) + np.log10(0.5)))
    assert shadowing_std_at(cfg, 150.0) == cfg.winner_b1.shadowing_std_db


def test_pathloss_errors():
    cfg = _config(ChannelModel.WINNER_INDOOR)
    with pytest.raises(NonPositiveDistance):
        pathloss_db("winner-indoor", 0.0, cfg)
    with pytest.raises(OutOfRange):
        pathloss_db("winner-indoor", 500.0, cfg)
    with pytest.raises(UnknownModel):
        pathloss_db("rayleigh", 10.0, _config(ChannelModel.RAYLEIGH))


# --- shadowing ------------------------------------------------------------------------------

def test_shadowing_std():
    positions = [(i * 1e6, 0.0) for i in range(100_000)]
    track = shadowing_track(8.0, 50.0, positions, RandomStream(4))
    assert np.std(track) == pytest.approx(8.0, abs=0.1)


def test_shadowing_correlation_at_decorrelation_distance():
    positions = [(i * 50.0, 0.0) for i in range(100_000)]
    track = shadowing_track(8.0, 50.0, positions, RandomStream(5))
    rho = np.corrcoef(track[:-1], track[1:])[0, 1]
    assert rho == pytest.approx(np.exp(-1.0), abs=0.03)


def test_shadowing_same_point_fully_correlated():
    track = shadowing_track(8.0, 50.0, [(3.0, 4.0)] * 10, RandomStream(6))
    assert np.all(track == track[0])


def test_shadowing_zero_decorrelation_is_iid():
    positions = [(0.0, 0.0)] + [(1.0, 0.0)] * 9
    track = shadowing_track(8.0, 0.0, positions, RandomStream(7))
    assert len(set(track.tolist())) == 10


# --- Clarke fading --------------------------------------------------------------------------

def test_doppler_frequency():
    assert doppler_hz(60 * KMH, 2.9e9) == pytest.approx(161.1, abs=0.1)


def test_clarke_static_vehicle_is_constant():
    h = clarke_fading(0.0, 2.9e9, np.linspace(0.0, 1.0, 5), 2, 3, RandomStream(8))
    assert h.shape == (5, 3, 2)
    assert np.allclose(h, h[0])


def test_clarke_autocorrelation_matches_bessel():
    fd = doppler_hz(60 * KMH, 2.9e9)
    tau = 1.0 / (2.0 * fd)
    h = clarke_fading(60 * KMH, 2.9e9, [0.0, tau], 100, 100, RandomStream(9))
    r = np.mean(h[0] * np.conj(h[1])).real / np.mean(np.abs(h[0]) ** 2)
    assert r == pytest.approx(j0(np.pi), abs=0.08)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.05)


def test_clarke_continues_realisation():
    times = np.arange(6) * 1e-3
    whole = clarke_fading(20.0, 2.9e9, times, 2, 2, RandomStream(10))
    tail = clarke_fading(20.0, 2.9e9, times[3:], 2, 2, RandomStream(10))
    assert np.allclose(whole[3:], tail)


# --- instances ------------------------------------------------------------------------------

def test_noise_power_from_psd():
    cfg = _config(ChannelModel.LARGE_SCALE)
    assert cfg.noise_dbm == pytest.approx(cfg.noise_psd_dbm_hz + 10 * np.log10(cfg.bandwidth_hz), abs=1e-9)
    assert cfg.noise_dbm == pytest.approx(-100.99, abs=0.01)
    inst = draw_instance(cfg, RandomStream(11))
    assert np.allclose(inst.sigma2, cfg.noise_w)
    assert inst.power == pytest.approx(10 ** (-0.5))


def test_pure_rayleigh_has_no_pathloss():
    cfg = _config(ChannelModel.RAYLEIGH, num_antennas=8, num_users=8)
    power = np.mean([np.mean(np.abs(draw_instance(cfg, RandomStream(12, i)).H) ** 2) for i in range(500)])
    assert power == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("model", list(ChannelModel))
def test_draw_instance_reproducible(model):
    cfg = _config(model)
    a = draw_instance(cfg, RandomStream(13))
    b = draw_instance(cfg, RandomStream(13))
    assert np.array_equal(a.H, b.H)
    assert np.all(np.isfinite(a.H))
    assert a.H.shape == (cfg.num_users, cfg.num_antennas)


def test_large_scale_placement_within_radius():
    cfg = _config(ChannelModel.LARGE_SCALE, shadowing_std_db=0.0)
    inner, outer = cfg.placement_range
    for i in range(50):
        inst = draw_instance(cfg, RandomStream(14, i))
        gain_db = 10 * np.log10(np.mean(np.abs(inst.H) ** 2, axis=1))
        # without shadowing the average gain is bounded by the pathloss at the annulus edges
        assert np.all(gain_db > -(128.1 + 37.6 * np.log10(outer / 1000.0)) - 20)
        assert np.all(gain_db < -(128.1 + 37.6 * np.log10(inner / 1000.0)) + 20)


def test_vehicular_gains_include_antennas():
    cfg = _config(ChannelModel.V2I_FREEWAY, shadowing_std_db=0.0, velocity_mps=0.0)
    base = draw_instance(cfg, RandomStream(15))
    no_gain = draw_instance(cfg.model_copy(update={"bs_antenna_gain_dbi": 0.0, "ue_antenna_gain_dbi": 0.0}),
                            RandomStream(15))
    ratio_db = 10 * np.log10(np.abs(base.H) ** 2 / np.abs(no_gain.H) ** 2)
    assert np.allclose(ratio_db, 11.0)


def test_channel_instance_validation():
    with pytest.raises(DimensionMismatch):
        ChannelInstance(H=np.ones((2, 2)), sigma2=np.ones(3), power=1.0)
    with pytest.raises(ValueError):
        ChannelInstance(H=np.ones((2, 2)), sigma2=np.ones(2), power=0.0)
    inst = ChannelInstance(H=np.ones((2, 3)), sigma2=np.ones(2), power=2.0)
    again = ChannelInstance.from_dict(inst.to_dict())
    assert np.array_equal(again.H, inst.H)
    assert again.power == 2.0


# --- tracks ---------------------------------------------------------------------------------

def test_vehicular_track_correlated_within_slot():
    cfg = _config(ChannelModel.V2I_URBAN, num_antennas=2, num_users=2, slot_duration_s=1e-4)
    track = VehicularTrack(cfg, RandomStream(16))
    first, second = track.sample(2)
    assert not np.array_equal(first.H, second.H)
    # 0.1 ms apart at 60 km/h is far below the coherence time
    corr = np.abs(np.vdot(first.H.ravel(), second.H.ravel())) / (np.linalg.norm(first.H) * np.linalg.norm(second.H))
    assert corr > 0.9


def test_vehicular_track_moves_and_stays_on_layout():
    cfg = _config(ChannelModel.V2I_URBAN, num_users=4)
    track = VehicularTrack(cfg, RandomStream(17))
    start = [v.position for v in track.vehicles]
    for _ in range(30):
        track.advance(1.0)
    for v in track.vehicles:
        assert -1e-6 <= v.position[0] <= 750.0 + 1e-6
        assert -1e-6 <= v.position[1] <= 1299.0 + 1e-6
    assert [v.position for v in track.vehicles] != start
    assert track.time_s == pytest.approx(30.0)


def test_vehicular_track_rejects_static_scenario():
    with pytest.raises(ValueError):
        VehicularTrack(_config(ChannelModel.RAYLEIGH), RandomStream(0))


def test_scenario_source_distinct_draws():
    source = ScenarioSource(_config(ChannelModel.RAYLEIGH, num_users=2, num_antennas=2), RandomStream(18))
    a = source.draw(3)
    source.next_slot()
    b = source.draw(3)
    hs = [x.H for x in a + b]
    for i in range(len(hs)):
        for j in range(i + 1, len(hs)):
            assert not np.array_equal(hs[i], hs[j])


def test_scenario_source_vehicular_cursor():
    source = ScenarioSource(_config(ChannelModel.V2I_FREEWAY, num_users=2, num_antennas=2), RandomStream(19))
    arrivals = source.draw(2)
    tests = source.draw(2)
    assert not np.array_equal(arrivals[0].H, tests[0].H)
