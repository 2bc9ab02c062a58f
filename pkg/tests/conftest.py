import numpy as np
import pytest

from frozen_align.store import Modality, build_pairs, open_store, write_store


def make_store(path, vectors, ids=None, modality=Modality.VISION):
    """Write a store from a 2-D array; ids default to r0000, r0001, ..."""
    vectors = np.asarray(vectors, dtype=np.float32)
    if ids is None:
        ids = [f"r{i:04d}" for i in range(vectors.shape[0])]
    write_store(zip(ids, vectors), vectors.shape[1], modality, path)
    return open_store(path)


def make_paired_dataset(tmp_path, vision, texts, captions_per_image, name="ds"):
    """Build stores + manifest for a pairing {image_id: [caption ids]}."""
    vis_ids = list(captions_per_image)
    txt_ids = [c for caps in captions_per_image.values() for c in caps]
    vis_store = make_store(tmp_path / f"{name}_vis.fstore", vision, vis_ids, Modality.VISION)
    txt_store = make_store(tmp_path / f"{name}_txt.fstore", texts, txt_ids, Modality.TEXT)
    manifest = tmp_path / f"{name}_pairs.tsv"
    with open(manifest, "w") as fh:
        for img, caps in captions_per_image.items():
            fh.write(f"{img}\t{','.join(caps)}\n")
    return build_pairs(vis_store, txt_store, manifest)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def synthetic_viterb_data(
    tmp_path,
    n_seen=4,
    n_unseen=2,
    imgs_per_class=20,
    texts_per_class=8,
    image_noise=0.15,
    text_noise=0.1,
    structured=True,
    seed=0,
    name="viterb",
):
    """Separable toy benchmark: class text embeddings equal the class's image
    centroid plus noise. Seen centroids are orthogonal axes; unseen centroids
    are normalized sums of two seen axes, so they lie inside the span the
    training data explores and a good projection transfers to them. With
    structured=False everything is pure noise (chance-level control)."""
    from frozen_align.class_reps import ClassRepresentationSet, RepKind
    from frozen_align.viterb import ViterbSplit

    rng = np.random.default_rng(seed)
    d = n_seen
    pairs = [(i, j) for i in range(n_seen) for j in range(i + 1, n_seen)]
    assert n_unseen <= len(pairs)
    # greedily spread axis usage so unseen centroids stay well separated
    usage = [0] * n_seen
    chosen = []
    while len(chosen) < n_unseen:
        best = min(pairs, key=lambda p: (usage[p[0]] + usage[p[1]], p))
        pairs.remove(best)
        usage[best[0]] += 1
        usage[best[1]] += 1
        chosen.append(best)
    axes = np.eye(d)
    combos = np.array([(axes[i] + axes[j]) / np.sqrt(2) for i, j in chosen])
    centroids = 2.0 * np.vstack([axes, combos])
    classes = [f"cls{k:02d}" for k in range(n_seen + n_unseen)]

    vis_ids, vis_rows, labels = [], [], []
    for ci, c in enumerate(classes):
        for k in range(imgs_per_class):
            vis_ids.append(f"{c}_img{k:03d}")
            if structured:
                vis_rows.append(centroids[ci] + image_noise * rng.standard_normal(d))
            else:
                vis_rows.append(rng.standard_normal(d))
            labels.append((vis_ids[-1], c))
    txt_ids, txt_rows, texts_map = [], [], {}
    for ci, c in enumerate(classes):
        ids = [f"{c}::{k:04d}" for k in range(texts_per_class)]
        texts_map[c] = ids
        for tid in ids:
            txt_ids.append(tid)
            if structured:
                txt_rows.append(centroids[ci] + text_noise * rng.standard_normal(d))
            else:
                txt_rows.append(rng.standard_normal(d))

    vision_store = make_store(tmp_path / f"{name}_vis.fstore",
                              np.array(vis_rows, dtype=np.float32), vis_ids)
    text_store = make_store(tmp_path / f"{name}_txt.fstore",
                            np.array(txt_rows, dtype=np.float32), txt_ids, Modality.TEXT)
    split = ViterbSplit(name, tuple(classes[:n_seen]), tuple(classes[n_seen:]),
                        provenance="synthetic")
    reps = ClassRepresentationSet(classes, texts_map, RepKind.DESCRIPTION)
    train_labels = [(img, c) for img, c in labels if c in split.seen]
    eval_labels = [(img, c) for img, c in labels if c in split.unseen]
    return split, vision_store, train_labels, eval_labels, reps, text_store
