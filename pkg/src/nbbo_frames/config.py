"""Scenario configuration files (YAML, explicit units in field names)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import yaml

from .analysis import FeedModel
from .consolidation import (
    ArrivalOrder,
    BoostedFrameEmission,
    Convention,
    LabFrameEmission,
    UncertaintyInterval,
)
from .network import ExchangeNode, Jitter, Link, Medium, MediumKind, Network
from .quotes import (
    MidWalk,
    QuoteUpdate,
    StreamSpec,
    check_quotes,
    generate_stream,
    lab_key,
    load_scenario,
    race_calibration_quotes,
)
from .spacetime import DEFAULT_EPSILON_KM2, LorentzBoost, flip_boost


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries the field path and line."""


# --- YAML with line numbers ------------------------------------------------------

class _LineDict(dict):
    line: Optional[int] = None


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    d = _LineDict(loader.construct_mapping(node, deep=True))
    d.line = node.start_mark.line + 1
    return d


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _where(path: str, obj: Any) -> str:
    line = getattr(obj, "line", None)
    return f"{path} (line {line})" if line else path


def _get(d: dict, key: str, path: str, kind=None, default=...):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{_where(path, d)}: missing required field '{key}'")
        return default
    value = d[key]
    if kind is not None and value is not None and not isinstance(value, kind):
        raise ConfigError(f"{_where(path, d)}: field '{key}' must be {_kind_name(kind)}")
    return value


def _kind_name(kind) -> str:
    kinds = kind if isinstance(kind, tuple) else (kind,)
    return " or ".join(k.__name__ for k in kinds)


NUM = (int, float)


# --- config dataclasses --------------------------------------------------------------

@dataclass(frozen=True)
class NodeSpec:
    id: str
    name: str
    lat: float
    lon: float
    alt_m: float = 0.0
    clock_rate: Union[float, str] = 1.0

    def build(self) -> ExchangeNode:
        node = ExchangeNode(self.id, self.name, self.lat, self.lon, self.alt_m)
        if self.clock_rate == "gravitational":
            return node.with_gravitational_clock()
        return ExchangeNode(self.id, self.name, self.lat, self.lon, self.alt_m, float(self.clock_rate))


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple[NodeSpec, ...] = ()
    links: tuple[Link, ...] = ()
    sip_node: Optional[str] = None
    sip_position: Optional[tuple[float, float, float]] = None
    default_link: Optional[Medium] = None
    distance_mode: str = "chord"

    def build(self) -> Network:
        return Network(
            [n.build() for n in self.nodes],
            self.links,
            sip_node=self.sip_node,
            sip_position=self.sip_position,
            default_link=self.default_link,
            distance_mode=self.distance_mode,
        )


@dataclass(frozen=True)
class EventFileSource:
    events_file: str


@dataclass(frozen=True)
class SyntheticSource:
    exchange_id: str
    rate_per_s: float
    duration_us: float
    seed: Optional[int] = None
    mid_walk: MidWalk = field(default_factory=MidWalk)
    spread_ticks: int = 2
    lot_shares: int = 100
    start_us: float = 0.0


@dataclass(frozen=True)
class CalibrationSource:
    informed: str
    resting: str
    races_per_minute: float
    duration_us: float
    seed: Optional[int] = None
    jump_ticks: int = 3
    catchup_us: float = 5000.0


StreamSource = Union[EventFileSource, SyntheticSource, CalibrationSource]


@dataclass(frozen=True)
class FlipConvention:
    """Boosted frame chosen to reverse the order of two named events."""

    event_a: str
    event_b: str
    margin: float = 0.01

    @property
    def name(self) -> str:
        return f"flip_{self.event_a}_{self.event_b}"


ConventionSpec = Union[ArrivalOrder, LabFrameEmission, BoostedFrameEmission, UncertaintyInterval, FlipConvention]


@dataclass(frozen=True)
class ScenarioConfig:
    network: NetworkSpec
    streams: tuple[StreamSource, ...]
    conventions: tuple[ConventionSpec, ...]
    seed: int
    horizon_us: float
    name: str = "scenario"
    feeds: Optional[FeedModel] = None
    n_securities: int = 1
    epsilon_km2: float = DEFAULT_EPSILON_KM2
    output_dir: Optional[str] = None
    output_formats: tuple[str, ...] = ("csv", "json")
    base_dir: Path = field(default=Path("."), compare=False)

    def validate(self) -> None:
        if not self.network.nodes:
            raise ConfigError("network.nodes: at least one exchange is required")
        if not self.streams:
            raise ConfigError("streams: at least one stream source is required")
        if not self.conventions:
            raise ConfigError("conventions: at least one convention is required")

    def with_seed(self, seed: int) -> ScenarioConfig:
        return _replace(self, seed=seed)

    def stream_seed(self, index: int, explicit: Optional[int]) -> int:
        if explicit is not None:
            return explicit
        return (self.seed * 1_000_003 + index) % 2**63

    def load_quotes(self, network: Network | None = None) -> list[QuoteUpdate]:
        network = network or self.network.build()
        quotes: list[QuoteUpdate] = []
        for i, src in enumerate(self.streams):
            if isinstance(src, EventFileSource):
                quotes += load_scenario(self.base_dir / src.events_file, network)
            elif isinstance(src, SyntheticSource):
                spec = StreamSpec(
                    src.exchange_id, self.stream_seed(i, src.seed), src.rate_per_s,
                    src.duration_us, src.mid_walk, src.spread_ticks, src.lot_shares, src.start_us,
                )
                quotes += generate_stream(spec, network.node(src.exchange_id))
            else:
                quotes += race_calibration_quotes(
                    network, src.informed, src.resting, src.races_per_minute,
                    src.duration_us, self.stream_seed(i, src.seed),
                    jump_ticks=src.jump_ticks, catchup_us=src.catchup_us,
                )
        quotes.sort(key=lab_key)
        check_quotes(quotes, network)
        return quotes

    def resolve_conventions(self, quotes: Sequence[QuoteUpdate]) -> list[tuple[str, Convention]]:
        by_id = {q.id: q for q in quotes}
        out = []
        for spec in self.conventions:
            if isinstance(spec, FlipConvention):
                try:
                    a, b = by_id[spec.event_a], by_id[spec.event_b]
                except KeyError as exc:
                    raise ConfigError(f"conventions: flip references unknown event {exc.args[0]!r}") from None
                out.append((spec.name, BoostedFrameEmission(flip_boost(a.event, b.event, spec.margin, self.epsilon_km2))))
            else:
                out.append((spec.name, spec))
        names = [n for n, _ in out]
        if len(set(names)) != len(names):
            raise ConfigError(f"conventions: duplicate convention names {names}")
        return out

    def digest(self) -> str:
        text = json.dumps(config_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _replace(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    from dataclasses import replace

    return replace(cfg, **changes)


# --- parsing -------------------------------------------------------------------

def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return config_from_dict(raw, base_dir=path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(raw: Any, base_dir: Path | str = ".") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    try:
        seed = _get(raw, "seed", "seed", int)
        if seed is None or isinstance(seed, bool):
            raise ConfigError(_where("seed", raw) + ": seed is mandatory")
        outputs = _get(raw, "outputs", "outputs", dict, {}) or {}
        feeds_raw = _get(raw, "feeds", "feeds", dict, None)
        cfg = ScenarioConfig(
            network=_parse_network(_get(raw, "network", "network", dict)),
            streams=tuple(
                _parse_stream(s, f"streams[{i}]")
                for i, s in enumerate(_get(raw, "streams", "streams", list, []) or [])
            ),
            conventions=tuple(
                _parse_convention(c, f"conventions[{i}]")
                for i, c in enumerate(_get(raw, "conventions", "conventions", list, []) or [])
            ),
            seed=seed,
            horizon_us=float(_get(raw, "horizon_us", "horizon_us", NUM)),
            name=str(_get(raw, "name", "name", str, "scenario")),
            feeds=_parse_feeds(feeds_raw) if feeds_raw is not None else None,
            n_securities=int(_get(raw, "n_securities", "n_securities", int, 1)),
            epsilon_km2=float(_get(raw, "epsilon_km2", "epsilon_km2", NUM, DEFAULT_EPSILON_KM2)),
            output_dir=_get(outputs, "dir", "outputs.dir", str, None),
            output_formats=tuple(_get(outputs, "formats", "outputs.formats", list, ["csv", "json"])),
            base_dir=Path(base_dir),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{_where('config', raw)}: {exc}") from None
    if cfg.horizon_us < 0:
        raise ConfigError("horizon_us must be non-negative")
    return cfg


def _parse_network(raw: dict) -> NetworkSpec:
    nodes = []
    for i, n in enumerate(_get(raw, "nodes", "network.nodes", list, []) or []):
        p = f"network.nodes[{i}]"
        try:
            nodes.append(
                NodeSpec(
                    str(_get(n, "id", p, str)), str(_get(n, "name", p, str, n.get("id", ""))),
                    float(_get(n, "lat", p, NUM)), float(_get(n, "lon", p, NUM)),
                    float(_get(n, "alt_m", p, NUM, 0.0)), _get(n, "clock_rate", p, (int, float, str), 1.0),
                )
            )
            nodes[-1].build()
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{_where(p, n)}: {exc}") from None
    links = []
    for i, l in enumerate(_get(raw, "links", "network.links", list, []) or []):
        p = f"network.links[{i}]"
        try:
            jit = _get(l, "jitter", p, dict, None)
            links.append(
                Link(
                    str(_get(l, "from", p, str)), str(_get(l, "to", p, str)),
                    _parse_medium(l, p),
                    _opt_float(_get(l, "distance_km", p, NUM, None)),
                    _parse_jitter(jit, p + ".jitter") if jit else None,
                    _get(l, "label", p, str, None),
                )
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{_where(p, l)}: {exc}") from None
    sip = _get(raw, "sip", "network.sip", dict)
    sip_node = _get(sip, "node", "network.sip", str, None)
    sip_pos = _get(sip, "position_km", "network.sip", list, None)
    if (sip_node is None) == (sip_pos is None):
        raise ConfigError(f"{_where('network.sip', sip)}: give exactly one of 'node' or 'position_km'")
    default = _get(raw, "default_link", "network.default_link", dict, None)
    spec = NetworkSpec(
        tuple(nodes), tuple(links), sip_node,
        tuple(float(c) for c in sip_pos) if sip_pos is not None else None,
        _parse_medium(default, "network.default_link") if default else None,
        str(_get(raw, "distance_mode", "network.distance_mode", str, "chord")),
    )
    try:
        spec.build()
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{_where('network', raw)}: {exc}") from None
    return spec


def _opt_float(v) -> Optional[float]:
    return None if v is None else float(v)


def _parse_medium(raw: dict, path: str) -> Medium:
    kind = _get(raw, "medium", path, str, "fiber")
    try:
        kind = MediumKind(kind)
    except ValueError:
        raise ConfigError(f"{_where(path, raw)}: unknown medium {kind!r}") from None
    if kind is MediumKind.VACUUM:
        return Medium.vacuum()
    default_n = 1.5 if kind is MediumKind.FIBER else 1.0003
    return Medium(kind, float(_get(raw, "n", path, NUM, default_n)))


def _parse_jitter(raw: dict, path: str) -> Jitter:
    params = _get(raw, "params", path, dict, {}) or {}
    try:
        return Jitter(
            str(_get(raw, "dist", path, str)),
            {k: float(v) for k, v in params.items()},
            int(_get(raw, "seed", path, int)),
        )
    except KeyError as exc:
        raise ConfigError(f"{_where(path, raw)}: missing jitter parameter {exc}") from None


def _parse_stream(raw: dict, path: str) -> StreamSource:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    if "events_file" in raw:
        return EventFileSource(str(_get(raw, "events_file", path, str)))
    if "race_calibration" in raw:
        c = _get(raw, "race_calibration", path, dict)
        p = path + ".race_calibration"
        return CalibrationSource(
            str(_get(c, "informed", p, str)), str(_get(c, "resting", p, str)),
            float(_get(c, "races_per_minute", p, NUM)), float(_get(c, "duration_us", p, NUM)),
            _get(c, "seed", p, int, None), int(_get(c, "jump_ticks", p, int, 3)),
            float(_get(c, "catchup_us", p, NUM, 5000.0)),
        )
    walk = _get(raw, "mid_walk", path, dict, None) or {}
    return SyntheticSource(
        str(_get(raw, "exchange_id", path, str)),
        float(_get(raw, "rate_per_s", path, NUM)),
        float(_get(raw, "duration_us", path, NUM)),
        _get(raw, "seed", path, int, None),
        MidWalk(int(_get(walk, "start_ticks", path + ".mid_walk", int, 10_000)),
                int(_get(walk, "max_step_ticks", path + ".mid_walk", int, 1))),
        int(_get(raw, "spread_ticks", path, int, 2)),
        int(_get(raw, "lot_shares", path, int, 100)),
        float(_get(raw, "start_us", path, NUM, 0.0)),
    )


def _parse_convention(raw: Any, path: str) -> ConventionSpec:
    if raw == "arrival_order":
        return ArrivalOrder()
    if raw == "lab_frame":
        return LabFrameEmission()
    if isinstance(raw, dict) and len(raw) == 1:
        (kind, body), = raw.items()
        try:
            if kind == "boosted":
                if "v_km_per_us" in body:
                    v = _get(body, "v_km_per_us", path + ".boosted", list)
                    return BoostedFrameEmission(LorentzBoost(tuple(float(c) for c in v)))
                beta = _get(body, "beta", path + ".boosted", list)
                return BoostedFrameEmission(LorentzBoost.from_beta(beta))
            if kind == "uncertainty":
                return UncertaintyInterval(float(_get(body, "epsilon_us", path + ".uncertainty", NUM)))
            if kind == "flip":
                events = _get(body, "events", path + ".flip", list)
                if len(events) != 2:
                    raise ConfigError(f"{path}.flip: 'events' must name exactly two events")
                return FlipConvention(str(events[0]), str(events[1]), float(_get(body, "margin", path + ".flip", NUM, 0.01)))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{_where(path, raw)}: {exc}") from None
    raise ConfigError(f"{_where(path, raw)}: unknown convention {raw!r}")


def _parse_feeds(raw: dict) -> FeedModel:
    jit = _get(raw, "reaction_jitter", "feeds", dict, None)
    try:
        return FeedModel(
            float(_get(raw, "delta_direct_us", "feeds", NUM)),
            float(_get(raw, "delta_sip_us", "feeds", NUM)),
            float(_get(raw, "reaction_us", "feeds", NUM, 0.0)),
            _parse_jitter(jit, "feeds.reaction_jitter") if jit else None,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{_where('feeds', raw)}: {exc}") from None


# --- serialisation ----------------------------------------------------------------

def _medium_dict(m: Medium) -> dict:
    d = {"medium": m.kind.value}
    if m.kind is not MediumKind.VACUUM:
        d["n"] = m.n
    return d


def _jitter_dict(j: Jitter) -> dict:
    return {"dist": j.dist, "params": dict(j.params), "seed": j.seed}


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def config_to_dict(cfg: ScenarioConfig) -> dict:
    net = cfg.network
    links = []
    for l in net.links:
        d = {"from": l.source, "to": l.target, **_medium_dict(l.medium),
             "distance_km": l.distance_km, "label": l.label,
             "jitter": _jitter_dict(l.jitter) if l.jitter else None}
        links.append(_drop_none(d))
    streams = []
    for s in cfg.streams:
        if isinstance(s, EventFileSource):
            streams.append({"events_file": s.events_file})
        elif isinstance(s, CalibrationSource):
            streams.append({"race_calibration": _drop_none({
                "informed": s.informed, "resting": s.resting, "races_per_minute": s.races_per_minute,
                "duration_us": s.duration_us, "seed": s.seed, "jump_ticks": s.jump_ticks,
                "catchup_us": s.catchup_us})})
        else:
            streams.append(_drop_none({
                "exchange_id": s.exchange_id, "rate_per_s": s.rate_per_s, "duration_us": s.duration_us,
                "seed": s.seed,
                "mid_walk": {"start_ticks": s.mid_walk.start_ticks, "max_step_ticks": s.mid_walk.max_step_ticks},
                "spread_ticks": s.spread_ticks, "lot_shares": s.lot_shares, "start_us": s.start_us}))
    conventions = []
    for c in cfg.conventions:
        if isinstance(c, ArrivalOrder):
            conventions.append("arrival_order")
        elif isinstance(c, LabFrameEmission):
            conventions.append("lab_frame")
        elif isinstance(c, BoostedFrameEmission):
            conventions.append({"boosted": {"v_km_per_us": list(c.boost.v)}})
        elif isinstance(c, UncertaintyInterval):
            conventions.append({"uncertainty": {"epsilon_us": c.epsilon_clock}})
        else:
            conventions.append({"flip": {"events": [c.event_a, c.event_b], "margin": c.margin}})
    out = {
        "name": cfg.name,
        "seed": cfg.seed,
        "horizon_us": cfg.horizon_us,
        "epsilon_km2": cfg.epsilon_km2,
        "n_securities": cfg.n_securities,
        "network": _drop_none({
            "distance_mode": net.distance_mode,
            "nodes": [
                {"id": n.id, "name": n.name, "lat": n.lat, "lon": n.lon, "alt_m": n.alt_m, "clock_rate": n.clock_rate}
                for n in net.nodes
            ],
            "links": links,
            "sip": {"node": net.sip_node} if net.sip_node is not None else {"position_km": list(net.sip_position)},
            "default_link": _medium_dict(net.default_link) if net.default_link else None,
        }),
        "streams": streams,
        "conventions": conventions,
        "outputs": _drop_none({"dir": cfg.output_dir, "formats": list(cfg.output_formats)}),
    }
    if cfg.feeds is not None:
        f = cfg.feeds
        out["feeds"] = _drop_none({
            "delta_direct_us": f.delta_direct, "delta_sip_us": f.delta_sip, "reaction_us": f.reaction,
            "reaction_jitter": _jitter_dict(f.reaction_jitter) if f.reaction_jitter else None,
        })
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, allow_unicode=True)
