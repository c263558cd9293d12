"""Clip datasets on disk.

One clip per container file: entries ``frames`` (3, T, H, W) f32,
``gt_wave`` (T,) f64, scalar ``fs``. A dataset directory holds clip files
plus ``manifest.csv`` with columns (clip, hr_bpm, seed).
"""

import csv
import os

import numpy as np

from .container import read_container, write_container
from .synth import PulseSpec, SceneSpec, VideoClip, gen_clip, gen_pulse


def save_clip(path, clip):
    entries = {
        "frames": clip.frames.astype(np.float32),
        "fs": np.float64(clip.fs),
    }
    if clip.gt_wave is not None:
        entries["gt_wave"] = np.asarray(clip.gt_wave, dtype=np.float64)
    write_container(path, entries)


def load_clip(path):
    tensors, _ = read_container(path)
    return VideoClip(
        frames=tensors["frames"],
        fs=float(tensors["fs"]),
        gt_wave=tensors.get("gt_wave"),
    )


def write_manifest(path, rows):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["clip", "hr_bpm", "seed"])
        wr.writerows(rows)


def read_manifest(path):
    with open(path, newline="") as f:
        rd = csv.DictReader(f)
        return [(r["clip"], float(r["hr_bpm"]), int(r["seed"])) for r in rd]


def list_clips(directory):
    """Clip paths from the manifest when present, else every .rmtc file."""
    manifest = os.path.join(directory, "manifest.csv")
    if os.path.exists(manifest):
        return [
            (os.path.join(directory, name), hr)
            for name, hr, _ in read_manifest(manifest)
        ]
    paths = sorted(
        os.path.join(directory, f)
        for f in os.listdir(directory)
        if f.endswith(".rmtc")
    )
    return [(p, None) for p in paths]


def generate_dataset(
    out_dir,
    n_train,
    n_test,
    frames=160,
    hw=32,
    fs=30.0,
    hr_range=(50.0, 120.0),
    modulation=0.01,
    noise=0.005,
    jitter=0.03,
    seed=0,
):
    """Write train/ and test/ clip directories with manifests."""
    rng = np.random.default_rng(seed)
    scene = SceneSpec(hw=hw, modulation_depth=modulation, sensor_noise_std=noise)
    made = {}
    for split, count in (("train", n_train), ("test", n_test)):
        split_dir = os.path.join(out_dir, split)
        os.makedirs(split_dir, exist_ok=True)
        rows = []
        for i in range(count):
            clip_seed = int(rng.integers(0, 2**31 - 1))
            hr = float(rng.uniform(*hr_range))
            pulse = gen_pulse(
                PulseSpec(
                    hr_bpm=hr,
                    fs=fs,
                    duration_s=frames / fs,
                    hr_jitter_pct=jitter,
                ),
                seed=clip_seed,
            )
            clip = gen_clip(pulse, scene, seed=clip_seed + 1, hr_bpm=hr)
            name = f"clip_{i:04d}.rmtc"
            save_clip(os.path.join(split_dir, name), clip)
            rows.append((name, hr, clip_seed))
        write_manifest(os.path.join(split_dir, "manifest.csv"), rows)
        made[split] = split_dir
    return made
