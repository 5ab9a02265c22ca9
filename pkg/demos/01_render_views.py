"""Render a sphere from a 9-view ring: fragments, depth, and view scores.

Walks the lowest layer of the library: camera construction, software
rasterization, and the per-pixel score maps that later weight the
back-projection. Writes depth/score images to demos/out/.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from mvfuse import compute_scores, icosphere, make_camera_ring, rasterize

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

mesh = icosphere(3)
print(f"mesh: {mesh.vertex_count} vertices, {mesh.face_count} faces")

cameras = make_camera_ring(9, elevation=0.0, distance=2.5, fov=50.0, resolution=(128, 128))
print("azimuths:", [c.azimuth for c in cameras])

for n, cam in enumerate(cameras[:3]):
    frag = rasterize(mesh, cam)
    fg = frag.foreground
    print(
        f"view {n}: {int(fg.sum())} foreground pixels, "
        f"depth range [{frag.depth[fg].min():.3f}, {frag.depth[fg].max():.3f}]"
    )
    # barycentric triples are a partition of unity on every covered pixel
    assert np.abs(frag.barycentric[fg].sum(axis=1) - 1.0).max() < 1e-9

    scores = compute_scores(mesh, cam, frag, z_far=5.0)
    depth_img = np.where(fg, np.clip(1 - frag.depth / 5.0, 0, 1), 0)
    score_img = np.clip(scores.view_score, 0, 1)
    Image.fromarray((depth_img * 255).astype(np.uint8)).save(out / f"demo01_depth_{n}.png")
    Image.fromarray((score_img * 255).astype(np.uint8)).save(out / f"demo01_score_{n}.png")

print("wrote depth/score maps to", out)
