import numpy as np
import pytest

from inrpatch import coords, config, training
from inrpatch.data import make_procedural
from inrpatch.discriminator import reset
from inrpatch.generator import generate, init_generator, transfer_weights
from inrpatch.profiler import ActivationCounter
from inrpatch.rng import Rng

SMALL = {"generator": {"z_dim": 8, "w_dim": 8, "width": 16, "depth": 2, "embed_pairs": 8,
                       "const_dim": 4},
         "discriminator": {"channels": [4, 8, 8]}}


def small_cfg(iters=(3, 3, 3), mode="multistage", **kw):
    d = {"H": 32, "seed": 1, **SMALL, **kw}
    d["stages"] = [{"iters": n, "batch": 4} for n in iters]
    cfg = config.from_dict(d)
    return cfg if mode == "multistage" else config.baseline_config(cfg, mode)


@pytest.fixture(scope="module")
def data():
    return make_procedural(8, 32, 0)


def test_smoke_finite_losses(data):
    out = training.run(small_cfg((10, 10, 10)), data)
    log = out["log"]
    assert len(log) == 30
    assert [m.iter for m in log] == list(range(30))
    for m in log:
        assert np.isfinite([m.g_loss, m.d_loss, m.patch_loss]).all()
        assert m.activations_fwd > 0 and m.peak_floats > 0 and m.wall_ms > 0


def test_stage1_never_crops(data, monkeypatch):
    calls = []
    real = coords.rcrop

    def spy(grid, *a, **k):
        calls.append(grid.N)
        return real(grid, *a, **k)

    monkeypatch.setattr(coords, "rcrop", spy)
    out = training.run(small_cfg((4, 0, 0)), data)
    assert len(out["log"]) == 4 and calls == []
    training.run(small_cfg((1, 2, 2)), data)
    assert calls == [16, 16, 32, 32]


def test_activation_count_constant_across_stages(data):
    log = training.run(small_cfg((2, 2, 2)), data)["log"]
    counts = {m.activations_fwd for m in log}
    assert len(counts) == 1
    # linear in the coordinate count: one coordinate's worth times (H/4)^2
    cfg = small_cfg()
    gen = init_generator(cfg.generator, 32, 0, "nearest", stage=3)
    z = Rng(0).normal((4, cfg.generator.z_dim)).astype(np.float32)
    with ActivationCounter() as counter:
        generate(gen, z, coords.CoordGrid(32, 32, 32, (5, 7), 1))
    assert counts == {counter.total("G.synth") * 8 * 8}


def test_patch_loss_logged(data):
    log = training.run(small_cfg((3, 3, 3)), data)["log"]
    assert all(m.patch_loss == 0 for m in log if m.stage == 1)
    assert all(m.patch_loss > 0 for m in log if m.stage > 1)


def test_zero_iter_transfer_is_verbatim(data):
    out = training.run(small_cfg((3, 0, 0)), data)
    g1, g3 = out["generators"][1], out["generators"][3]
    for k in g1.mlp_names():
        assert g1.params[k].data.tobytes() == g3.params[k].data.tobytes()
    assert g3.N == 32 and g3.params["const"].data.shape[0] == 32 * 32


def test_stages_train_and_checkpoint_each_stage(data):
    ends = []
    out = training.run(small_cfg((2, 2, 2)), data, on_stage_end=lambda i, g, d: ends.append(
        (i, {k: v.data.copy() for k, v in g.params.items()}, d.side)))
    assert [e[0] for e in ends] == [1, 2, 3]
    assert all(e[2] == 8 for e in ends)
    g2, g3 = ends[1][1], ends[2][1]
    assert any(g2[k].tobytes() != g3[k].tobytes() for k in g2 if k != "const")


def test_frozen_previous_unchanged(data):
    cfg = small_cfg((0, 3, 0))
    g1 = init_generator(cfg.generator, 32, 0, "nearest", stage=1)
    frozen = g1.frozen()
    before = {k: v.data.tobytes() for k, v in frozen.params.items()}
    g2 = transfer_weights(g1, "nearest", 2)
    disc = reset(cfg.discriminator, 8, 0)
    training.train_stage(cfg.stages[1], g2, frozen, disc, data, Rng(0))
    assert {k: v.data.tobytes() for k, v in frozen.params.items()} == before
    assert any(g2.params[k].data.tobytes() != before[k] for k in g2.mlp_names())


def test_stage_precondition(data):
    cfg = small_cfg()
    g = init_generator(cfg.generator, 32, 0, "nearest", stage=2)
    disc = reset(cfg.discriminator, 8, 0)
    with pytest.raises(ValueError):
        training.train_stage(cfg.stages[1], g, None, disc, data, Rng(0))


def test_discriminator_reset_policy(data):
    sides = []
    cfg = small_cfg((1, 1, 1), discriminator={"channels": [4, 8, 8], "policy": "reset"})
    training.run(cfg, data, on_stage_end=lambda i, g, d: sides.append(d.side))
    assert sides == [8, 8, 8]


@pytest.mark.parametrize("mode, side", [("image_based", 32), ("patch_based", 8)])
def test_baseline_modes(data, mode, side):
    out = training.run(small_cfg((1, 1, 1), mode=mode), data)
    assert len(out["log"]) == 3
    assert out["disc"].side == side
    assert all(m.patch_loss == 0 for m in out["log"])
    assert set(out["generators"]) == {3}


def test_image_based_is_16x(data):
    ours = training.run(small_cfg((1, 0, 0)), data)["log"][0].activations_fwd
    full = training.run(small_cfg((1, 0, 0), mode="image_based"), data)["log"][0].activations_fwd
    assert full == 16 * ours


def test_budget_stops_training(data):
    cfg = small_cfg((10 ** 6, 10 ** 6, 10 ** 6), budget_seconds=0.6)
    log = training.run(cfg, data)["log"]
    assert {m.stage for m in log} == {1, 2, 3}
    assert sum(m.wall_ms for m in log) < 5000


def test_training_grid_rules():
    rng = Rng(0)
    g1 = training.training_grid("multistage", 1, 64, 16, rng)
    assert g1.is_full and g1.N == 16
    g2 = training.training_grid("multistage", 2, 64, 16, rng)
    assert g2.N == 32 and g2.side == 16 and g2.origin[0] % 2 == 0
    assert training.training_grid("image_based", 1, 64, 16, rng).count == 64 * 64
    gp = training.training_grid("patch_based", 1, 64, 16, rng)
    assert gp.N == 64 and gp.side == 16
