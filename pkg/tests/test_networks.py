import numpy as np
import pytest
import torch

from gancodec.codec import (
    CodecConfig,
    Generator,
    QuantizerSpec,
    build_decoder,
    build_encoder,
    compress,
    decode,
    decompress,
    encode,
    reconstruct,
    to_uint8,
    to_unit,
)
from gancodec.codec.networks import ConvBlock
from gancodec.errors import ConfigurationError, NumericError, ShapeError


@pytest.fixture(scope="module")
def tiny():
    torch.manual_seed(0)
    cfg = CodecConfig.tiny(F=8, L=4)
    return Generator(cfg, QuantizerSpec.uniform(4)).eval()


def test_encoder_structure():
    enc = build_encoder(CodecConfig())
    assert len(enc.blocks) == 6
    strides = [b[1].stride[0] for b in enc.blocks]
    assert strides == [1, 2, 2, 2, 2, 1]
    widths = [b[1].out_channels for b in enc.blocks]
    assert widths == [64, 128, 256, 512, 512, 8]
    assert all(isinstance(b[0], torch.nn.ReflectionPad2d) for b in enc.blocks)


def test_decoder_structure():
    dec = build_decoder(CodecConfig())
    assert len(dec.residual) == 9
    ups = [m for m in dec.upsample if isinstance(m, torch.nn.ConvTranspose2d)]
    assert len(ups) == 4 and all(m.stride == (2, 2) for m in ups)
    assert isinstance(dec.tail[-1], torch.nn.Tanh)


@pytest.mark.parametrize("kw", [
    {"encoder_channels": (16, 32, 64, 128)},
    {"decoder_channels": (64, 32)},
])
def test_bad_schedules(kw):
    with pytest.raises(ConfigurationError):
        cfg = CodecConfig(**kw)
        build_encoder(cfg), build_decoder(cfg)


def test_latent_shapes(tiny):
    z = encode(np.zeros((64, 128, 3)), tiny.encoder)
    assert z.shape == (4, 8, 8) and np.isfinite(z).all()
    g4 = Generator(CodecConfig.tiny(F=4), QuantizerSpec.uniform(4))
    assert encode(np.zeros((64, 128, 3)), g4.encoder).shape == (4, 8, 4)


def test_cityscapes_bottleneck_shape():
    torch.manual_seed(0)
    gen = Generator(CodecConfig.tiny(F=2), QuantizerSpec.uniform(4))
    z = encode(np.zeros((512, 1024, 3)), gen.encoder)
    assert z.shape == (32, 64, 2)
    out = decode(np.zeros((32, 64, 8)), Generator(CodecConfig.tiny(F=8), QuantizerSpec.uniform(4)).decoder)
    assert out.shape == (512, 1024, 3)


def test_indivisible_input(tiny):
    with pytest.raises(ShapeError):
        encode(np.zeros((60, 128, 3)), tiny.encoder)
    with pytest.raises(ShapeError):
        encode(np.zeros((64, 128)), tiny.encoder)


def test_decoder_range_and_shape(tiny, rng):
    out = decode(rng.normal(0, 3, (4, 8, 8)), tiny.decoder)
    assert out.shape == (64, 128, 3)
    assert out.min() >= -1 and out.max() <= 1


def test_determinism(tiny, rng):
    x = rng.uniform(-1, 1, (32, 48, 3))
    np.testing.assert_array_equal(encode(x, tiny.encoder), encode(x, tiny.encoder))
    np.testing.assert_array_equal(reconstruct(x, tiny), reconstruct(x, tiny))


def test_nonfinite_names_block(tiny):
    with pytest.raises(NumericError, match="block 1"):
        encode(np.full((16, 16, 3), np.nan), tiny.encoder)


def test_compress_round_trip(tiny, rng):
    img = rng.integers(0, 256, (32, 64, 3), dtype=np.uint8)
    data = compress(to_unit(img), tiny)
    # header + 2*4*8 elements * 2 bits / 8
    assert len(data) == 15 + 16
    np.testing.assert_array_equal(decompress(data, tiny), reconstruct(to_unit(img), tiny))


def test_pixel_mapping():
    v = np.arange(256, dtype=np.uint8)
    np.testing.assert_array_equal(to_uint8(to_unit(v)), v)
    assert to_uint8(np.array([-2.0, 2.0])).tolist() == [0, 255]


def test_generator_quant_modes(tiny, rng):
    x = torch.from_numpy(rng.uniform(-1, 1, (1, 3, 32, 32)).astype(np.float32))
    with torch.no_grad():
        hard = tiny(x, "hard")
        st = tiny(x, "straight-through")
        raw = tiny(x, None)
    # float32 rounding of soft + (hard - soft) leaves ~1 ulp of difference
    torch.testing.assert_close(hard, st, atol=1e-4, rtol=0)
    assert not torch.equal(raw, hard)


def test_convblock_options():
    b = ConvBlock(3, 4, 3, relu=False, norm=False)
    assert len(b) == 2
