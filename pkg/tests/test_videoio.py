import numpy as np
import pytest
from PIL import Image

from tpqi import videoio
from tpqi.videoio import FormatError, LumaSequence


def make_y4m(width, height, n_frames, colorspace="C420", y_value=128,
             header_extra=" F25:1 Ip A1:1"):
    chroma_frac = {"C420": 0.25, "C422": 0.5, "C444": 1.0, "Cmono": 0.0}[colorspace]
    header = f"YUV4MPEG2 W{width} H{height}{header_extra} {colorspace}\n".encode()
    y = bytes([y_value]) * (width * height)
    c = bytes([128]) * int(width * height * chroma_frac)
    return header + b"".join(b"FRAME\n" + y + c + c for _ in range(n_frames))


class TestY4m:
    def test_reads_header_geometry(self, tmp_path):
        p = tmp_path / "a.y4m"
        p.write_bytes(make_y4m(8, 8, 3))
        seq = videoio.read_y4m(p)
        assert seq.frames.shape == (3, 8, 8)
        assert seq.frame_rate == 25.0

    def test_black_frames_decode_to_zero(self, tmp_path):
        p = tmp_path / "a.y4m"
        p.write_bytes(make_y4m(8, 8, 2, y_value=0))
        assert videoio.read_y4m(p).frames.max() == 0.0

    def test_no_frames_is_an_error(self, tmp_path):
        p = tmp_path / "a.y4m"
        p.write_bytes(b"YUV4MPEG2 W8 H8\n")
        with pytest.raises(FormatError, match="no frames"):
            videoio.read_y4m(p)

    def test_truncated_frame_names_index(self, tmp_path):
        data = make_y4m(8, 8, 2)
        p = tmp_path / "a.y4m"
        p.write_bytes(data[:-10])
        with pytest.raises(FormatError, match="frame 1"):
            videoio.read_y4m(p)

    def test_malformed_header_reports_offset(self, tmp_path):
        p = tmp_path / "a.y4m"
        p.write_bytes(b"NOTY4M W8 H8\nFRAME\n" + bytes(96))
        with pytest.raises(FormatError, match="byte offset 0"):
            videoio.read_y4m(p)

    @pytest.mark.parametrize("colorspace", ["C420", "C422", "C444", "Cmono"])
    def test_chroma_subsamplings(self, tmp_path, colorspace):
        p = tmp_path / "a.y4m"
        p.write_bytes(make_y4m(8, 6, 3, colorspace=colorspace, y_value=200))
        seq = videoio.read_y4m(p)
        assert seq.frames.shape == (3, 6, 8)
        np.testing.assert_allclose(seq.frames, 200 / 255.0, rtol=1e-6)

    def test_write_read_round_trip_within_8bit(self, tmp_path):
        rng = np.random.default_rng(0)
        seq = LumaSequence(rng.random((4, 16, 18)).astype(np.float32))
        p = tmp_path / "rt.y4m"
        videoio.write_y4m(seq, p)
        back = videoio.read_y4m(p)
        assert np.abs(back.frames - seq.frames).max() <= 0.5 / 255 + 1e-7


class TestRaw:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        seq = LumaSequence(rng.random((5, 9, 13)).astype(np.float32))
        p = tmp_path / "a.raw"
        videoio.write_raw(seq, p)
        back = videoio.read_raw(p)
        assert np.array_equal(back.frames, seq.frames)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "a.raw"
        p.write_bytes(b"NOTMAGIC" + bytes(16))
        with pytest.raises(FormatError, match="magic"):
            videoio.read_raw(p)

    def test_partial_frame_payload(self, tmp_path):
        seq = LumaSequence(np.zeros((3, 4, 4), np.float32))
        p = tmp_path / "a.raw"
        videoio.write_raw(seq, p)
        p.write_bytes(p.read_bytes()[:-7])
        with pytest.raises(FormatError, match="whole number"):
            videoio.read_raw(p)


class TestImageSequence:
    def test_reads_ordered_pngs(self, tmp_path):
        for i in range(3):
            Image.fromarray(np.full((16, 16), i * 40, np.uint8)).save(tmp_path / f"f{i}.png")
        seq = videoio.read_image_sequence(tmp_path)
        assert seq.frames.shape == (3, 16, 16)
        np.testing.assert_allclose(seq.frames[:, 0, 0], [0, 40 / 255, 80 / 255], atol=1e-7)

    def test_bt601_red_luma(self, tmp_path):
        red = np.zeros((8, 8, 3), np.uint8)
        red[..., 0] = 255
        for i in range(3):
            Image.fromarray(red).save(tmp_path / f"f{i}.png")
        seq = videoio.read_image_sequence(tmp_path)
        np.testing.assert_allclose(seq.frames, 0.299, atol=1e-9)

    def test_mixed_dimensions_error(self, tmp_path):
        Image.fromarray(np.zeros((8, 8), np.uint8)).save(tmp_path / "a.png")
        Image.fromarray(np.zeros((8, 8), np.uint8)).save(tmp_path / "b.png")
        Image.fromarray(np.zeros((9, 8), np.uint8)).save(tmp_path / "c.png")
        with pytest.raises(FormatError, match="mismatch"):
            videoio.read_image_sequence(tmp_path)

    def test_too_few_files(self, tmp_path):
        Image.fromarray(np.zeros((8, 8), np.uint8)).save(tmp_path / "a.png")
        with pytest.raises(FormatError, match=">= 3"):
            videoio.read_image_sequence(tmp_path)


class TestResize:
    def test_downscale_geometry(self):
        seq = LumaSequence(np.random.default_rng(0).random((3, 540, 960)).astype(np.float32))
        out = videoio.resize(seq, 480, 270)
        assert out.frames.shape == (3, 270, 480)

    def test_identity_is_bit_exact(self):
        seq = LumaSequence(np.random.default_rng(0).random((3, 12, 17)).astype(np.float32))
        out = videoio.resize(seq, 17, 12)
        assert np.array_equal(out.frames, seq.frames)

    def test_constant_stays_constant(self):
        seq = LumaSequence(np.full((3, 20, 30), 0.625, np.float32))
        out = videoio.resize(seq, 7, 11)
        np.testing.assert_allclose(out.frames, 0.625, atol=1e-6)

    def test_monotone_on_linear_ramp(self):
        ramp = np.tile(np.linspace(0, 1, 64, dtype=np.float32), (32, 1))
        seq = LumaSequence(np.stack([ramp] * 3))
        out = videoio.resize(seq, 23, 9)
        rows = out.frames[0]
        assert (np.diff(rows, axis=1) >= -1e-7).all()

    def test_rejects_zero_target(self):
        seq = LumaSequence(np.zeros((3, 8, 8), np.float32))
        with pytest.raises(ValueError):
            videoio.resize(seq, 0, 8)


class TestLumaSequence:
    def test_validate_needs_three_frames(self):
        with pytest.raises(ValueError, match=">= 3"):
            LumaSequence(np.zeros((2, 8, 8), np.float32)).validate()

    def test_validate_range(self):
        bad = np.zeros((3, 8, 8), np.float32)
        bad[0, 0, 0] = 1.5
        with pytest.raises(ValueError, match="outside"):
            LumaSequence(bad).validate()

    def test_read_video_dispatch(self, tmp_path):
        p = tmp_path / "a.y4m"
        p.write_bytes(make_y4m(8, 8, 3))
        assert videoio.read_video(p).n_frames == 3
        with pytest.raises(FormatError, match="unrecognized"):
            videoio.read_video(tmp_path / "clip.mp4")
