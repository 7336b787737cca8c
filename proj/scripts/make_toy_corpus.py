#!/usr/bin/env python3
"""Regenerates the bundled toy corpus (data/toy) and the golden evaluation
files (tests/golden). Output is fully determined by the constants below."""

import json
import random
from pathlib import Path

from sklearn.metrics import f1_score

ROOT = Path(__file__).resolve().parent.parent
TOY = ROOT / "data" / "toy"
GOLDEN = ROOT / "tests" / "golden"

OPENFACE_AUS = ["01", "02", "04", "05", "06", "07", "09", "10", "12", "14", "15", "17", "20", "23", "25", "26", "45"]
EMOTION_AUS = {
    "anger": ["04", "05", "07", "23"],
    "disgust": ["09", "10", "15"],
    "sadness": ["01", "04", "15"],
    "joy": ["06", "12"],
    "neutral": [],
    "surprise": ["01", "02", "05", "26"],
    "fear": ["01", "02", "04", "05", "07", "20", "26"],
}

# sample_id, score, emotion, faces in the AU table (0 = no table), has ECPE
SAMPLES = [
    ("s01", -1.2, "anger", 2, True),
    ("s02", 2.0, "joy", 1, False),
    ("s03", 0.0, "neutral", 0, False),
    ("s04", 1.4, "surprise", 2, True),
    ("s05", -2.6, "sadness", 1, False),
    ("s06", -0.4, "disgust", 0, True),
    ("s07", 0.8, "joy", 3, False),
    ("s08", -1.8, "fear", 1, True),
    ("s09", 0.0, None, 0, False),
    ("s10", None, "anger", 0, True),
    ("s11", 2.4, "joy", 0, False),
    ("s12", None, None, 0, True),
]

UTTERANCES = {
    "s01": "You took my seat again!",
    "s02": "I got the job, I start Monday!",
    "s03": "The meeting is at three.",
    "s04": "Wait, you are moving to Paris?",
    "s05": "I miss her every single day.",
    "s06": "Ugh, the milk went bad.",
    "s07": "This cake is pretty good.",
    "s08": "Did you hear that noise?",
    "s09": "We will see how it goes.",
    "s10": "Stop reading my messages!",
    "s11": "Best birthday ever!",
    "s12": "Fine, I will do it myself.",
}

CONVERSATIONS = {
    "s01": ([("u1", "Ross", "I saved you a seat."), ("u2", "Joey", "Thanks, I sat in yours."),
             ("u3", "Ross", "You took my seat again!")],
            [("u3", "u2", "anger")]),
    "s04": ([("u1", "Monica", "I have news."), ("u2", "Monica", "I am moving to Paris."),
             ("u3", "Rachel", "Wait, you are moving to Paris?")],
            [("u3", "u2", "surprise"), ("u3", "u1", "surprise")]),
    "s06": ([("u1", "Phoebe", "Want some cereal?"), ("u2", "Chandler", "Sure."),
             ("u3", "Chandler", "Ugh, the milk went bad.")],
            [("u3", "u3", "disgust")]),
    "s08": ([("u1", "Joey", "It is late."), ("u2", "Rachel", "Did you hear that noise?")],
            [("u2", "u2", "fear")]),
    "s10": ([("u1", "Ross", "Who is Mark?"), ("u2", "Rachel", "You read my phone?"),
             ("u3", "Rachel", "Stop reading my messages!")],
            [("u3", "u1", "anger"), ("u3", "u2", "anger")]),
    "s12": ([("u1", "Monica", "Nobody cleaned up."), ("u2", "Monica", "Fine, I will do it myself."),
             ("u3", "Chandler", "Sorry, I am tired.")],
            [("u2", "u1", "anger"), ("u3", "u2", "sadness")]),
}

FRAMES = 8


def au_rows(rng, emotion, faces):
    """OpenFace-style rows; each face gets one planted peak frame."""
    rows = []
    boosted = EMOTION_AUS[emotion] or ["12"]
    for face in range(faces):
        peak = rng.randint(1, FRAMES)
        for frame in range(1, FRAMES + 1):
            vals = {au: round(rng.uniform(0.0, 0.8), 2) for au in OPENFACE_AUS}
            if frame == peak:
                for au in boosted:
                    vals[au] = round(rng.uniform(2.0, 4.5), 2)
            rows.append((frame, face, vals))
    return rows


def write_au_csv(path, rows):
    header = ["frame", "face_id", "timestamp", "confidence", "success"]
    header += [f"AU{a}_r" for a in OPENFACE_AUS] + [f"AU{a}_c" for a in OPENFACE_AUS]
    lines = [", ".join(header)]
    for frame, face, vals in sorted(rows, key=lambda r: (r[1], r[0])):
        cells = [str(frame), str(face), f"{(frame - 1) * 0.04:.3f}", "0.98", "1"]
        cells += [f"{vals[a]:.2f}" for a in OPENFACE_AUS]
        cells += ["1" if vals[a] >= 1.0 else "0" for a in OPENFACE_AUS]
        lines.append(", ".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_pgm(path, seed, frames):
    rng = random.Random(seed)
    out = bytearray()
    for k in range(frames):
        out += b"P5\n16 16\n255\n"
        base = rng.randint(40, 200)
        for y in range(16):
            for x in range(16):
                out.append((base + 7 * x + 5 * y + 11 * k) % 256)
    path.write_bytes(bytes(out))


def sample_rows(rng):
    rows = []
    for sid, score, emotion, faces, ecpe in SAMPLES:
        row = {"sample_id": sid, "media_ref": f"media/{sid}.pgm", "utterance_text": UTTERANCES[sid]}
        if score is not None:
            row["sentiment_score"] = score
        if emotion is not None:
            row["emotion_label"] = emotion
        if ecpe:
            turns, pairs = CONVERSATIONS[sid]
            row["dialogue_context"] = [{"utterance_id": u, "speaker": s, "text": t} for u, s, t in turns]
            row["cause_pairs"] = [{"emotion_utterance_id": e, "cause_utterance_id": c, "emotion": m}
                                  for e, c, m in pairs]
        else:
            row["dialogue_context"] = [{"utterance_id": "u1", "speaker": "Speaker", "text": UTTERANCES[sid]}]
        if faces:
            row["au_table"] = f"au/{sid}.csv"
            write_au_csv(TOY / "au" / f"{sid}.csv", au_rows(rng, emotion, faces))
        write_pgm(TOY / "media" / f"{sid}.pgm", int(sid[1:]), FRAMES)
        rows.append(row)
    return rows


def golden(rows):
    """Hand-written predictions and an independently computed report."""
    preds = {
        "s01:msa": "negative", "s02:msa": "positive", "s03:msa": "positive", "s04:msa": "negative",
        "s05:msa": "negative", "s06:msa": "neutral", "s07:msa": "positive", "s08:msa": "negative",
        "s09:msa": "negative", "s11:msa": "???",
        "s01:er": "anger", "s02:er": "joy", "s03:er": "sadness", "s04:er": "surprise", "s05:er": "sadness",
        "s06:er": "anger", "s07:er": "joy", "s08:er": "surprise", "s10:er": "anger", "s11:er": "not sure",
        "s01:ecpe": "u3 -> u2 : anger",
        "s04:ecpe": "u3 -> u2 : surprise\nu3 -> u2 : surprise",
        "s06:ecpe": "u3 -> u1 : disgust",
        "s08:ecpe": "u2 -> u2 : fear\nnothing else",
        "s10:ecpe": "u3 -> u1 : anger\nu3 -> u2 : sadness\nu2 -> u1 : anger",
        "s12:ecpe": "",
    }
    with open(GOLDEN / "predictions.jsonl", "w") as f:
        for rid in sorted(preds):
            f.write(json.dumps({"record_id": rid, "response": preds[rid]}) + "\n")

    labels = ["anger", "disgust", "sadness", "joy", "neutral", "surprise", "fear"]
    values, counts = {}, {}

    # MSA: gold sign from the score class, "???" is unparsed (always wrong).
    msa = [(r["sample_id"], r["sentiment_score"]) for r in rows if "sentiment_score" in r]
    sign = lambda s: -1 if s < 0 else (1 if s > 0 else 0)
    nn = [(preds[f"{sid}:msa"] == "negative") == (sign(s) < 0) and preds[f"{sid}:msa"] != "???" for sid, s in msa]
    np_items = [(sid, s) for sid, s in msa if sign(s) != 0]
    np_ok = [(preds[f"{sid}:msa"] == "negative") == (sign(s) < 0) and preds[f"{sid}:msa"] != "???"
             for sid, s in np_items]
    values["MSA.acc2_nn"] = sum(nn) / len(nn)
    values["MSA.acc2_np"] = sum(np_ok) / len(np_ok)
    counts["MSA.items"] = len(msa)
    counts["MSA.gold_zero"] = sum(1 for _, s in msa if sign(s) == 0)
    counts["MSA.parse_failures"] = 1

    er = [(r["sample_id"], r["emotion_label"]) for r in rows if "emotion_label" in r]
    y_true = [g for _, g in er]
    y_pred = [preds[f"{sid}:er"] if preds[f"{sid}:er"] in labels else "<unparsed>" for sid, _ in er]
    values["ER.acc"] = sum(a == b for a, b in zip(y_true, y_pred)) / len(er)
    values["ER.weighted_f1"] = float(f1_score(y_true, y_pred, labels=sorted(set(y_true)), average="weighted",
                                              zero_division=0))
    counts["ER.items"] = len(er)
    counts["ER.parse_failures"] = 1

    matched = predicted = gold_n = 0
    per = {}
    for r in rows:
        if "cause_pairs" not in r:
            continue
        gold = {(p["emotion_utterance_id"], p["cause_utterance_id"], p["emotion"]) for p in r["cause_pairs"]}
        pred = set()
        for line in preds[f"{r['sample_id']}:ecpe"].split("\n"):
            parts = line.replace("->", " ").replace(":", " ").split()
            if "->" in line and len(parts) == 3 and parts[2] in labels:
                pred.add(tuple(parts))
        matched += len(pred & gold)
        predicted += len(pred)
        gold_n += len(gold)
        for e in labels:
            t, pp, gg = per.get(e, (0, 0, 0))
            per[e] = (t + len({x for x in pred & gold if x[2] == e}), pp + len({x for x in pred if x[2] == e}),
                      gg + len({x for x in gold if x[2] == e}))
    f1 = lambda t, p, g: 0.0 if t == 0 else 2 * (t / p) * (t / g) / ((t / p) + (t / g))
    values["ECPE.precision"] = matched / predicted
    values["ECPE.recall"] = matched / gold_n
    values["ECPE.f1"] = f1(matched, predicted, gold_n)
    values["ECPE.weighted_f1"] = sum(g * f1(t, p, g) for t, p, g in per.values() if g) / gold_n
    counts["ECPE.items"] = sum(1 for r in rows if "cause_pairs" in r)
    counts["ECPE.gold_pairs"] = gold_n
    counts["ECPE.predicted_pairs"] = predicted
    counts["ECPE.matched_pairs"] = matched
    counts["ECPE.parse_failures"] = 1
    counts["FER.items"] = sum(1 for r in rows if "au_table" in r)
    counts["ERI.items"] = len(er)

    (GOLDEN / "report.json").write_text(json.dumps({"values": values, "counts": counts}, indent=2, sort_keys=True) + "\n")


def task_matrix(rows):
    """Records each authored row should yield per task (ERI needs a label and the reason generator)."""
    per_task = {
        "MSA": sum(1 for r in rows if "sentiment_score" in r),
        "ER": sum(1 for r in rows if "emotion_label" in r),
        "FER": sum(1 for r in rows if "au_table" in r and "emotion_label" in r),
        "ERI": sum(1 for r in rows if "emotion_label" in r),
        "ECPE": sum(1 for r in rows if "cause_pairs" in r),
    }
    out = {"per_task": per_task, "distinct_samples": len(rows)}
    (GOLDEN / "task_matrix.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


def main():
    for d in (TOY / "au", TOY / "media", GOLDEN):
        d.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20241016)
    rows = sample_rows(rng)
    with open(TOY / "annotations.jsonl", "w") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    (TOY / "manifest.json").write_text(json.dumps(
        {"sources": [{"name": "toy", "annotations": "annotations.jsonl"}]}, indent=2) + "\n")

    # Same rows plus one that carries no label at all.
    with open(TOY / "annotations_bad.jsonl", "w") as f:
        for row in rows[:11]:
            f.write(json.dumps(row) + "\n")
        f.write(json.dumps({"sample_id": "s99", "media_ref": "media/s01.pgm", "utterance_text": "Hmm."}) + "\n")
    (TOY / "manifest_bad.json").write_text(json.dumps(
        {"sources": [{"name": "toy-bad", "annotations": "annotations_bad.jsonl"}]}, indent=2) + "\n")

    golden(rows)
    task_matrix(rows)


if __name__ == "__main__":
    main()
