import json
import os

import numpy as np
import pytest

import minia
from minia import primitives


def reference_from_render(mesh, candidate, config):
    """Build a ReferenceImage whose pixels are a render of the mesh."""
    out = minia.render(mesh, candidate.as_transform, config)
    alpha = np.where(out.depth_mask, 255, 0).astype(np.uint8)
    return minia.ReferenceImage(rgba=np.dstack([out.shaded, alpha]))


@pytest.fixture
def small_config():
    return minia.RenderConfig(resolution=128)


@pytest.fixture
def l_mesh():
    return primitives.l_plate(0.4)


def write_dataset(root, figure_specs, render_config=None):
    """Lay out a dataset directory with a manifest.

    ``figure_specs`` maps figure_id -> (reference_candidate_index,
    {method_id: mesh}).  References are renders of the first method's
    mesh so the stub pipeline has something meaningful to match.
    """
    os.makedirs(root, exist_ok=True)
    config = render_config or minia.RenderConfig(resolution=128)
    figures = []
    for figure_id, (cand_index, meshes) in figure_specs.items():
        first_mesh = next(iter(meshes.values()))
        axis = minia.thinnest_axis(minia.compute_aabb(first_mesh))
        cand = minia.enumerate_candidates(axis)[cand_index]
        ref = reference_from_render(first_mesh, cand, config)
        ref_path = os.path.join(root, f"{figure_id}.png")
        minia.save_png(ref.rgba, ref_path)

        mesh_entries = {}
        for method_id, mesh in meshes.items():
            mesh_path = os.path.join(root, f"{figure_id}_{method_id}.obj")
            minia.save_obj(mesh, mesh_path)
            mesh_entries[method_id] = os.path.basename(mesh_path)
        figures.append(
            {
                "figure_id": figure_id,
                "reference": os.path.basename(ref_path),
                "meshes": mesh_entries,
            }
        )

    manifest = {
        "dataset_id": "synthetic",
        "figures": figures,
        "render_config": {"resolution": config.resolution},
    }
    manifest_path = os.path.join(root, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest_path
