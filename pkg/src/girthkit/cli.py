"""Command-line interface.

Exit codes: 0 success, 1 domain error (bad data, no section, unknown ids),
2 usage error (unparseable flags, handled by click).
"""
from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click

from . import calib, cloud as cloudmod, synth
from .bvh import build_bvh
from .config import Config, load_config
from .errors import GirthkitError, InvalidParam, ParseError
from .mesh import load_mesh, save_mesh
from .probes import CircleProbe, probe_from_dict
from .sessions import Store, measurement_payload
from .server import payload_json


def _vec3(text: str, name: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise InvalidParam(f"{name} must be x,y,z, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise InvalidParam(f"{name} must be numeric: {exc}") from exc


class _Group(click.Group):
    """Click group that maps domain errors to exit code 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except GirthkitError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)


@click.group(cls=_Group)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML config file.")
@click.pass_context
def main(ctx, config_path):
    """Measurable 3D figure reconstruction toolkit."""
    ctx.obj = load_config(config_path)


@main.command()
@click.argument("mesh_file", type=click.Path())
@click.option("--center", required=True, help="Probe center, x,y,z in cm.")
@click.option("--normal", required=True, help="Probe plane normal, x,y,z.")
@click.option("--radius", default="auto", show_default=True,
              help="Probe radius in cm, or 'auto'.")
@click.option("--rays", type=int, default=None,
              help="Rays per section (default from config).")
@click.option("--height", type=float, default=None,
              help="Also integrate volume over this height below the circle.")
@click.option("--h", "slab_h", type=float, default=None,
              help="Slab height for volume integration (cm).")
@click.pass_obj
def measure(config: Config, mesh_file, center, normal, radius, rays,
            height, slab_h):
    """Measure a mesh section (and optionally a volume); JSON on stdout."""
    probe = probe_from_dict(
        {"center": _vec3(center, "--center"),
         "normal": _vec3(normal, "--normal"),
         "radius": radius,
         "rays": rays if rays is not None else config.ray_count})
    bvh = build_bvh(load_mesh(mesh_file))
    payload = measurement_payload(
        bvh, probe, height=height,
        h=config.slice_h if slab_h is None else slab_h)
    click.echo(payload_json(payload), nl=False)


@main.group(name="synth")
def synth_cmd():
    """Synthetic shapes and simulated rig scans."""


@synth_cmd.command("shape")
@click.argument("kind", type=click.Choice(synth.SHAPE_KINDS))
@click.argument("out_file", type=click.Path())
@click.option("--size", type=float, default=15.0, show_default=True,
              help="Edge length for cube/pyramid (cm).")
@click.option("--radius", type=float, default=25.0, show_default=True,
              help="Radius for cylinder/cone/sphere (cm).")
@click.option("--height", type=float, default=50.0, show_default=True,
              help="Height for cylinder/cone/pyramid (cm).")
@click.option("--segments", type=int, default=synth.DEFAULT_SEGMENTS,
              show_default=True, help="Tessellation density.")
def synth_shape(kind, out_file, size, radius, height, segments):
    """Generate a closed analytic test shape and save it."""
    spec = synth.ShapeSpec(kind=kind, size=size, radius=radius,
                           height=height, segments=segments)
    mesh = synth.gen_shape(spec)
    save_mesh(mesh, out_file)
    click.echo(f"{out_file}: {mesh.vertex_count} vertices, "
               f"{mesh.triangle_count} triangles")


@synth_cmd.command("scan")
@click.argument("mesh_file", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--preset", default="8cam", show_default=True,
              help="Rig preset (8cam or 13cam).")
@click.option("--noise", type=float, default=0.0, show_default=True,
              help="Depth noise sigma along the ray (cm).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--center-height", type=float, default=synth.RIG_AIM_HEIGHT,
              show_default=True,
              help="World z the mesh center is lifted to before scanning.")
def synth_scan(mesh_file, out_dir, preset, noise, seed, center_height):
    """Depth-scan a mesh with a virtual rig; one depth grid per camera."""
    import numpy as np

    from .transforms import RigidTransform

    mesh = load_mesh(mesh_file)
    bvh = build_bvh(mesh)
    lo, hi = mesh.bounds()
    lift = RigidTransform(np.eye(3),
                          [0.0, 0.0, center_height - (lo[2] + hi[2]) / 2.0])
    rig = synth.rig_preset(preset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for cam in rig.cameras:
        camera = synth.VirtualCamera(intrinsics=cam.intrinsics,
                                     pose=rig.world_pose(cam.id),
                                     noise_sigma=noise,
                                     seed=seed * 1009 + cam.id)
        grid = synth.simulate_depth(bvh, camera, scene_pose=lift)
        cloudmod.save_depth_grid(grid, out / f"cam{cam.id}.dg")
    calib.save_rig(rig, out / "rig.json")
    click.echo(f"{out}: {len(rig.cameras)} depth grids + rig.json")


_CAPTURE_RE = re.compile(r"^pos(\d+)_cam(\d+)\.(ply|dg)$")


@main.command()
@click.argument("captures_dir", type=click.Path())
@click.option("--topology", "topology_file", required=True,
              type=click.Path(), help="JSON {camera_id: [row, mast]}.")
@click.option("--edge", type=float, default=None,
              help="Marker cube edge length in cm (default from config).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path(),
              help="Output rig JSON.")
@click.pass_obj
def calibrate(config: Config, captures_dir, topology_file, edge, seed,
              out_file):
    """Calibrate rig extrinsics from cube-marker captures.

    CAPTURES_DIR holds files named pos<k>_cam<id>.ply or .dg, one cloud of
    the marker per (position, camera).
    """
    try:
        topo_raw = json.loads(Path(topology_file).read_text())
    except (OSError, ValueError) as exc:
        raise ParseError(f"{topology_file}: {exc}") from exc
    topology = {int(k): (int(v[0]), int(v[1])) for k, v in topo_raw.items()}
    captures = calib.CaptureSet(
        edge_length=edge if edge is not None else config.marker_edge)
    n_files = 0
    for path in sorted(Path(captures_dir).iterdir()):
        m = _CAPTURE_RE.match(path.name)
        if not m:
            continue
        pc = (cloudmod.load_depth_grid(path) if m.group(3) == "dg"
              else cloudmod.load_cloud(path))
        captures.add(int(m.group(1)), int(m.group(2)), pc)
        n_files += 1
    if n_files == 0:
        raise InvalidParam(
            f"no pos<k>_cam<id>.(ply|dg) captures in {captures_dir}")
    rig = calib.calibrate_rig(captures, topology, seed=seed)
    calib.save_rig(rig, out_file)
    click.echo(f"{out_file}: {len(rig.cameras)} cameras calibrated "
               f"from {n_files} captures")


@main.command()
@click.argument("cloud_files", nargs=-1, required=True, type=click.Path())
@click.option("--rig", "rig_file", required=True, type=click.Path(),
              help="Rig JSON with per-camera extrinsics.")
@click.option("--out", "out_file", required=True, type=click.Path(),
              help="Fused point cloud (PLY).")
@click.option("--no-filter", is_flag=True,
              help="Skip the pre-processing chain, only transform and merge.")
@click.pass_obj
def fuse(config: Config, cloud_files, rig_file, out_file, no_filter):
    """Filter per-camera depth grids and fuse them into one cloud.

    Inputs are cam<id>.dg depth grids; the chain is truncate, median,
    bilateral, statistical outlier removal, normal estimation, then fuse.
    """
    rig = calib.load_rig(rig_file)
    clouds = {}
    for f in cloud_files:
        m = re.search(r"cam(\d+)\.", Path(f).name)
        if not m:
            raise InvalidParam(f"{f}: expected a cam<id>.* filename")
        pc = cloudmod.load_depth_grid(f)
        if not no_filter:
            pc = cloudmod.truncate_depth(pc, config.z_max)
            pc = cloudmod.median_filter(pc, config.median_window)
            pc = cloudmod.bilateral_filter(pc, config.bilateral_sigma_s,
                                           config.bilateral_sigma_r)
            pc = cloudmod.sor_filter(pc, config.sor_k,
                                     config.sor_stddev_mult)
            pc = cloudmod.estimate_normals(pc, config.normals_k)
        clouds[int(m.group(1))] = pc
    fused = calib.fuse(clouds, rig)
    cloudmod.save_cloud(fused, out_file)
    click.echo(f"{out_file}: {fused.valid_count} points fused "
               f"from {len(clouds)} cameras")


@main.command()
@click.option("--rays", default="100,1000,10000", show_default=True,
              help="Comma-separated ray counts to sweep.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path())
@click.pass_obj
def bench(config: Config, rays, seed, fmt, out_file):
    """Run the measurement sweep over the shape suite; emit a report."""
    from . import harness
    try:
        ray_counts = [int(r) for r in rays.split(",")]
    except ValueError as exc:
        raise InvalidParam(f"--rays must be integers: {exc}") from exc
    report = harness.run_measurement_sweep(
        harness.default_shape_suite(), ray_counts, h=config.slice_h,
        seed=seed)
    harness.emit_report(report, out_file, format=fmt)
    click.echo(f"{out_file}: {len(report.rows)} rows")


@main.group()
def session():
    """Patient session store (4D measurement series)."""


@session.command("add")
@click.argument("patient")
@click.argument("session_id")
@click.option("--timestamp", required=True, help="ISO-8601 timestamp.")
@click.option("--model", "model_id", required=True,
              help="Model id already in the store (see 'model add').")
@click.pass_obj
def session_add(config: Config, patient, session_id, timestamp, model_id):
    store = Store(config.data_path)
    info = store.add_session(patient, session_id, timestamp, model_id)
    click.echo(f"{patient}/{info.session} @ {info.timestamp} "
               f"-> {info.model_id}")


@session.command("list")
@click.argument("patient")
@click.pass_obj
def session_list(config: Config, patient):
    store = Store(config.data_path)
    for info in store.list_sessions(patient):
        click.echo(f"{info.session}\t{info.timestamp}\t{info.model_id}")


@session.command("compare")
@click.argument("patient")
@click.option("--center", required=True, help="Probe center, x,y,z in cm.")
@click.option("--normal", required=True, help="Probe plane normal, x,y,z.")
@click.option("--radius", default="auto", show_default=True)
@click.option("--rays", type=int, default=None)
@click.option("--sessions", default=None,
              help="Comma-separated session ids (default: all).")
@click.pass_obj
def session_compare(config: Config, patient, center, normal, radius, rays,
                    sessions):
    """Apply one probe across a patient's sessions; JSON series on stdout."""
    store = Store(config.data_path)
    probe = probe_from_dict(
        {"center": _vec3(center, "--center"),
         "normal": _vec3(normal, "--normal"),
         "radius": radius,
         "rays": rays if rays is not None else config.ray_count})
    ids = sessions.split(",") if sessions else None
    series = store.session_compare(patient, probe, ids)
    click.echo(json.dumps(series, indent=2, sort_keys=True))


@main.group()
def model():
    """Model store (meshes served for measurement)."""


@model.command("add")
@click.argument("model_id")
@click.argument("mesh_file", type=click.Path())
@click.pass_obj
def model_add(config: Config, model_id, mesh_file):
    Store(config.data_path).add_model(model_id, mesh_file)
    click.echo(f"{model_id} <- {mesh_file}")


@model.command("list")
@click.pass_obj
def model_list(config: Config):
    for entry in Store(config.data_path).list_models():
        click.echo(f"{entry['id']}\t{entry['vertex_count']}v"
                   f"\t{entry['triangle_count']}t")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.pass_obj
def serve(config: Config, host, port):
    """Run the HTTP service backing the browser viewer."""
    from .server import serve as run_serve
    run_serve(config, host=host, port=port)


if __name__ == "__main__":
    main()
