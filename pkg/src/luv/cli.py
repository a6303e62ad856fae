"""Command line entry points.

One binary, subcommand per pipeline stage. Every command runs end to end
with `--sim` and no hardware. Exit codes: 0 success, 1 runtime failure,
2 bad configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import capture, datastore, evalkit, plugnet, segmodel, synthscene
from .config import AppConfig, ConfigError
from .maskgen import extract_labels
from .model import CalibrationProfile, ImageRGB

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

RUNTIME_ERRORS = (
    capture.CameraError,
    capture.SessionError,
    datastore.DatasetError,
    plugnet.PlugError,
    segmodel.ModelError,
    OSError,
)


class UsageError(Exception):
    """Bad arguments discovered after parsing."""


def _load_config(args) -> AppConfig:
    cfg = AppConfig.load(args.config) if args.config else AppConfig.from_env()
    overrides = {}
    if getattr(args, "sim", False):
        overrides["camera"] = "sim"
    for name in ("seed", "scene", "dataset"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[{"scene": "scene_kind", "dataset": "dataset_root"}.get(name, name)] = value
    return cfg.override(**overrides)


def _emit(args, doc: dict, human: str) -> None:
    if args.json:
        print(json.dumps(doc, sort_keys=True))
    else:
        print(human)


def _build_scene(cfg: AppConfig):
    return synthscene.make_scene(
        cfg.scene_kind, seed=cfg.seed, noise_sigma=cfg.noise_sigma
    )


def _parse_plug(spec: str) -> plugnet.PlugEndpoint:
    host, _, port = spec.partition(":")
    return plugnet.PlugEndpoint(host=host, port=int(port) if port else plugnet.DEFAULT_PORT)


def _build_rig(cfg: AppConfig) -> capture.LightRig:
    # Replay frames were captured under the right lights already, so a
    # replay rig only has to track nominal channel state.
    if cfg.uv_plug is None and cfg.camera in ("sim", "replay"):
        return capture.LightRig(
            uv=capture.SimulatedChannel("uv"),
            ambient=capture.SimulatedChannel("ambient", on=True),
            settle_delay_ms=0,
        )
    if cfg.uv_plug is None:
        raise ConfigError("capture over real lights needs a uv_plug endpoint")
    ambient = None
    if cfg.ambient_plug is not None:
        ambient = capture.PlugChannel(_parse_plug(cfg.ambient_plug))
    return capture.LightRig(uv=capture.PlugChannel(_parse_plug(cfg.uv_plug)), ambient=ambient)


def _build_camera(cfg: AppConfig, scene, rig):
    if cfg.camera == "replay":
        if not cfg.replay_paths:
            raise ConfigError("replay camera needs replay_paths")
        return capture.FileReplayCamera(cfg.replay_paths)
    return capture.SimulatedCamera(scene, rig)


def _load_profile(cfg: AppConfig, scene, path=None) -> CalibrationProfile:
    chosen = path or cfg.profile_path
    if chosen is None:
        return synthscene.default_profile(scene)
    p = Path(chosen)
    if not p.exists():
        raise ConfigError(f"profile not found: {p}")
    try:
        return CalibrationProfile.from_dict(json.loads(p.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{p}: invalid profile: {exc}") from exc


def _parse_floats(text: str):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise UsageError("expected at least one number")
    return values


def cmd_capture(cfg: AppConfig, args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    cfg.check_paths()
    scene = _build_scene(cfg)
    rig = _build_rig(cfg)
    camera = _build_camera(cfg, scene, rig)
    profile = _load_profile(cfg, scene, args.profile)
    writer = datastore.DatasetWriter(cfg.dataset_root)
    bracket = _parse_floats(args.bracket) if args.bracket else None

    def randomizer(i: int) -> None:
        if cfg.camera == "sim":
            camera.scene = synthscene.randomize(scene, seed=cfg.seed + i)

    summary = capture.collect_session(
        camera, rig, profile, args.n, randomizer=randomizer, sink=writer, bracket=bracket
    )
    _emit(
        args,
        summary.to_dict(),
        f"captured {summary.completed}/{summary.requested} samples "
        f"into {cfg.dataset_root} ({summary.failed} failed)",
    )
    return EXIT_OK


def cmd_label(cfg: AppConfig, args) -> int:
    cfg.check_paths()
    if args.image:
        path = Path(args.image)
        if not path.exists():
            raise ConfigError(f"image not found: {path}")
        if not (args.profile or cfg.profile_path):
            raise UsageError("--profile is required with --image")
        profile = _load_profile(cfg, None, args.profile)
        exposure = args.exposure if args.exposure is not None else profile.uv_exposure
        img = capture.FileReplayCamera([path]).grab()
    else:
        scene = _build_scene(cfg)
        profile = _load_profile(cfg, scene, args.profile)
        exposure = args.exposure if args.exposure is not None else profile.uv_exposure
        img = synthscene.render_uv(scene, exposure)
    mask, keypoints = extract_labels([(exposure, img)], profile)
    payload = datastore.mask_png_bytes(mask)
    if args.out:
        Path(args.out).write_bytes(payload)
    counts = {
        str(spec.class_id): int((mask.classes == spec.class_id).sum())
        for spec in profile.classes
    }
    doc = {
        "counts": counts,
        "keypoints": [kp.to_dict() for kp in keypoints],
        "out": args.out,
    }
    human = ", ".join(f"class {k}: {v} px" for k, v in counts.items())
    _emit(args, doc, f"{human}; {len(keypoints)} keypoints"
          + (f"; mask written to {args.out}" if args.out else ""))
    return EXIT_OK


def cmd_sweep(cfg: AppConfig, args) -> int:
    cfg.check_paths()
    exposures = _parse_floats(args.exposures)
    scene = _build_scene(cfg)
    rig = _build_rig(cfg)
    camera = _build_camera(cfg, scene, rig)
    profile = _load_profile(cfg, scene, args.profile)
    best, scores = capture.sweep_exposures(camera, rig, profile, exposures)
    doc = {"best": best, "scores": {str(e): s for e, s in sorted(scores.items())}}
    _emit(args, doc, f"best exposure {best:g} "
          + " ".join(f"{e:g}:{s}" for e, s in sorted(scores.items())))
    return EXIT_OK


def cmd_train(cfg: AppConfig, args) -> int:
    root = Path(args.dataset or cfg.dataset_root)
    if not root.exists():
        raise ConfigError(f"dataset not found: {root}")
    manifest = datastore.read_dataset(root)
    pairs = []
    for record in manifest.records:
        sample = datastore.read_sample(root, record)
        if sample.labels is not None:
            pairs.append((sample.std_image, sample.labels[0]))
    train_config = segmodel.TrainConfig(
        learning_rate=args.lr,
        iterations=args.iterations,
        l2=args.l2,
        seed=cfg.seed,
        pixels_per_class=args.pixels_per_class,
    )
    params = segmodel.fit(pairs, train_config)
    segmodel.save_model(params, args.out)
    final_loss = params.loss_trace[-1] if params.loss_trace else None
    doc = {
        "model": args.out,
        "samples": len(pairs),
        "classes": params.n_classes,
        "final_loss": final_loss,
    }
    _emit(args, doc, f"trained on {len(pairs)} samples, "
          f"{params.n_classes} classes, final loss "
          f"{final_loss if final_loss is None else format(final_loss, '.6f')}, "
          f"saved to {args.out}")
    return EXIT_OK


def _dataset_labels(root: Path):
    manifest = datastore.read_dataset(root)
    labels = {}
    for record in manifest.records:
        sample = datastore.read_sample(root, record)
        if sample.labels is not None:
            labels[record.id] = sample.labels
    return labels


def cmd_eval(cfg: AppConfig, args) -> int:
    for name, value in (("--pred", args.pred), ("--ref", args.ref)):
        if not Path(value).exists():
            raise ConfigError(f"{name} dataset not found: {value}")
    pred = _dataset_labels(Path(args.pred))
    ref = _dataset_labels(Path(args.ref))
    try:
        report = evalkit.compare_labelers(pred, ref, keypoint_radius=args.radius)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(args, report.to_dict(), report.to_text())
    return EXIT_OK


def cmd_simulate(cfg: AppConfig, args) -> int:
    scene = _build_scene(cfg)
    profile = _load_profile(cfg, scene, args.profile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    std = synthscene.render_standard(scene, profile.std_exposure)
    uv = synthscene.render_uv(scene, args.exposure or profile.uv_exposure)
    mask, keypoints = synthscene.ground_truth(scene)
    (out / "std.png").write_bytes(datastore.image_png_bytes(std))
    (out / "uv.png").write_bytes(datastore.image_png_bytes(uv))
    (out / "mask.png").write_bytes(datastore.mask_png_bytes(mask))
    (out / "keypoints.json").write_text(
        json.dumps([kp.to_dict() for kp in keypoints], indent=2), encoding="utf-8"
    )
    (out / "scene.json").write_text(
        json.dumps(scene.to_dict(), indent=2), encoding="utf-8"
    )
    doc = {
        "out": str(out),
        "scene": cfg.scene_kind,
        "seed": cfg.seed,
        "labeled_pixels": int((mask.classes > 0).sum()),
        "keypoints": len(keypoints),
    }
    _emit(args, doc, f"wrote scene files to {out}")
    return EXIT_OK


def cmd_plug(cfg: AppConfig, args) -> int:
    endpoint = plugnet.PlugEndpoint(host=args.host, port=args.port)
    if args.state in ("on", "off"):
        plugnet.set_relay(
            endpoint,
            plugnet.RelayCommand.ON if args.state == "on" else plugnet.RelayCommand.OFF,
            timeout_ms=args.timeout_ms,
        )
    state = plugnet.query_state(endpoint, timeout_ms=args.timeout_ms)
    name = "on" if state is plugnet.RelayCommand.ON else "off"
    _emit(args, {"state": name}, f"plug {args.host}:{args.port} is {name}")
    return EXIT_OK


def cmd_cost(cfg: AppConfig, args) -> int:
    try:
        images = evalkit.cost_breakeven(args.setup, args.price, args.labels_per_image)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(args, {"images": images}, str(images))
    return EXIT_OK


def cmd_serve(cfg: AppConfig, args) -> int:
    from .service import build_server

    cfg.check_paths()
    if args.port is not None:
        cfg = cfg.override(service_port=args.port)
    server = build_server(cfg)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to AppConfig JSON (overrides LUV_CONFIG)")
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    common.add_argument("--seed", type=int, help="override configured seed")
    common.add_argument("--scene", choices=synthscene.ARCHETYPES + ("multi",),
                        help="simulated scene kind")
    common.add_argument("--sim", action="store_true", help="force the simulated camera")

    parser = argparse.ArgumentParser(prog="luv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", parents=[common], help="collect paired samples")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--profile", help="calibration profile JSON")
    p.add_argument("--dataset", help="dataset root to write into")
    p.add_argument("--bracket", help="comma-separated UV exposures")
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("label", parents=[common], help="extract labels from a UV frame")
    p.add_argument("--image", help="UV image file (default: simulated frame)")
    p.add_argument("--profile", help="calibration profile JSON")
    p.add_argument("--exposure", type=float, help="exposure of the given frame")
    p.add_argument("--out", help="write the mask PNG here")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("sweep", parents=[common], help="score candidate UV exposures")
    p.add_argument("--exposures", required=True, help="comma-separated candidates")
    p.add_argument("--profile", help="calibration profile JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", parents=[common], help="fit the pixel segmenter")
    p.add_argument("--dataset", help="labeled dataset root")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--lr", type=float, default=2.0)
    p.add_argument("--l2", type=float, default=1e-5)
    p.add_argument("--pixels-per-class", type=int, default=4000)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="compare two labeled datasets")
    p.add_argument("--pred", required=True, help="dataset with predicted labels")
    p.add_argument("--ref", required=True, help="dataset with reference labels")
    p.add_argument("--radius", type=float, default=5.0, help="keypoint match radius")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", parents=[common], help="render a synthetic scene")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--profile", help="calibration profile JSON")
    p.add_argument("--exposure", type=float, help="UV exposure override")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plug", parents=[common], help="switch or query a smart plug")
    p.add_argument("--host", required=True)
    p.add_argument("--port", type=int, default=plugnet.DEFAULT_PORT)
    p.add_argument("--state", choices=["on", "off", "query"], default="query")
    p.add_argument("--timeout-ms", type=int, default=plugnet.DEFAULT_TIMEOUT_MS)
    p.set_defaults(func=cmd_plug)

    p = sub.add_parser("cost", parents=[common], help="label-cost break-even point")
    p.add_argument("--setup", type=float, required=True, help="rig cost, dollars")
    p.add_argument("--price", type=float, required=True, help="dollars per label")
    p.add_argument("--labels-per-image", type=float, required=True)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("serve", parents=[common], help="run the calibration HTTP service")
    p.add_argument("--port", type=int, help="override configured port")
    p.add_argument("--dataset", help="dataset root for profiles and captures")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
