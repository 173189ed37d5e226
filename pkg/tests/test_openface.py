import numpy as np
import pytest

from liptraj.errors import (
    ContractError,
    EmptyInputError,
    FormatError,
    ParseError,
)
from liptraj.openface import (
    ClipRecord,
    PoseParams,
    RawFrame,
    estimate_fps,
    filter_clip,
    parse_openface_csv,
    parse_transcript,
)


def golden_csv():
    """Two rows with hand-picked values, shuffled column order, extra cols."""
    cols = ["frame", "face_id", "timestamp", "confidence", "success"]
    cols += ["pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"]
    coords = []
    for axis in "XYZ":
        coords += [f"{axis}_{i}" for i in range(68)]
    # interleave an ignored column and move timestamp to the end
    header = ["gaze_0_x"] + cols[:2] + cols[3:] + coords + ["timestamp"]

    def row(ts, conf, success, pose, base):
        values = {"gaze_0_x": "9.9", "frame": "1", "face_id": "0",
                  "confidence": str(conf), "success": str(success),
                  "timestamp": str(ts)}
        for name, v in zip(["pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"], pose):
            values[name] = str(v)
        for i in range(68):
            values[f"X_{i}"] = str(base + i)
            values[f"Y_{i}"] = str(base + 100 + i)
            values[f"Z_{i}"] = str(base + 200 + i)
        return ", ".join(values[h] for h in header)

    lines = [", ".join(header)]
    lines.append(row(0.0, 0.93, 1, (1.5, -2.0, 400.0, 0.1, -0.2, 0.3), 10.0))
    lines.append(row(0.04, 0.88, 1, (1.6, -2.1, 401.0, 0.11, -0.21, 0.31), 11.0))
    return "\n".join(lines) + "\n"


def test_golden_fixture_field_exact():
    frames = parse_openface_csv(golden_csv().encode())
    assert len(frames) == 2
    f0, f1 = frames
    assert f0.timestamp == 0.0 and f1.timestamp == 0.04
    assert f0.confidence == 0.93 and f1.confidence == 0.88
    assert f0.success and f1.success
    assert f0.pose == PoseParams(1.5, -2.0, 400.0, 0.1, -0.2, 0.3)
    assert f1.pose == PoseParams(1.6, -2.1, 401.0, 0.11, -0.21, 0.31)
    # points ordered by landmark index, (x, y, z) per point
    assert f0.points[0].tolist() == [10.0, 110.0, 210.0]
    assert f0.points[67].tolist() == [77.0, 177.0, 277.0]
    assert f1.points[5].tolist() == [16.0, 116.0, 216.0]


def test_header_only_is_empty_input():
    header = golden_csv().splitlines()[0]
    with pytest.raises(EmptyInputError):
        parse_openface_csv((header + "\n").encode())


def test_missing_pose_column_named():
    text = golden_csv().replace("pose_Rx", "pose_RX")
    with pytest.raises(FormatError, match="pose_Rx"):
        parse_openface_csv(text.encode())


def test_non_numeric_cell_reports_row_and_column():
    text = golden_csv()
    lines = text.splitlines()
    header = [h.strip() for h in lines[0].split(",")]
    idx = header.index("Y_3")
    cells = lines[1].split(",")
    cells[idx] = " abc"
    lines[1] = ",".join(cells)
    with pytest.raises(ParseError, match="row 2") as err:
        parse_openface_csv("\n".join(lines).encode())
    assert err.value.column == "Y_3"


def test_completely_empty_input():
    with pytest.raises(EmptyInputError):
        parse_openface_csv(b"")


def test_transcript_paper_examples():
    assert parse_transcript(b"Text:  it's not just my work\nConf: 4\n") == "IT'S NOT JUST MY WORK"
    assert parse_transcript(b"Text: forty two") == "FORTY TWO"


def test_transcript_collapses_whitespace():
    assert parse_transcript(b"Text:   HELLO \t WORLD  \n") == "HELLO WORLD"


def test_transcript_without_text_line():
    with pytest.raises(FormatError):
        parse_transcript(b"Conf: 3\n")


def _clip(confs, successes=None):
    successes = successes or [True] * len(confs)
    frames = [
        RawFrame(
            timestamp=i * 0.0125,
            confidence=c,
            success=s,
            pose=PoseParams(0, 0, 0, 0, 0, 0),
            points=np.zeros((68, 3)),
        )
        for i, (c, s) in enumerate(zip(confs, successes))
    ]
    return ClipRecord("c0", "s0", "HI", 80.0, frames)


def test_filter_accepts_high_confidence():
    result = filter_clip(_clip([0.9, 0.9, 0.9]))
    assert result.accepted and result.offending == []


def test_filter_rejects_and_names_frame():
    result = filter_clip(_clip([0.9, 0.65, 0.95]), threshold=0.7)
    assert not result.accepted
    assert result.offending == [1]


def test_filter_zero_threshold_accepts_any_confidence():
    result = filter_clip(_clip([0.0, 0.01, 1.0]), threshold=0.0)
    assert result.accepted


def test_filter_failed_tracking_rejects():
    result = filter_clip(_clip([0.9, 0.9], successes=[True, False]))
    assert result.offending == [1]


def test_filter_monotone_in_threshold():
    confs = [0.5, 0.71, 0.9, 0.62]
    accepted = []
    for thr in (0.0, 0.3, 0.5, 0.62, 0.71, 0.9, 1.0):
        accepted.append(filter_clip(_clip(confs), threshold=thr).accepted)
    # once rejected, stays rejected as the threshold rises
    assert all(a >= b for a, b in zip(accepted, accepted[1:]))


def test_filter_threshold_out_of_range():
    with pytest.raises(ContractError):
        filter_clip(_clip([0.9]), threshold=1.5)


def test_estimate_fps():
    clip = _clip([0.9] * 5)
    assert estimate_fps(clip.frames) == pytest.approx(80.0)
