"""Frame-dependence of consolidated best prices across a spatially distributed exchange network."""

__version__ = "0.1.0"

from .spacetime import (
    C,
    IntervalClass,
    LorentzBoost,
    NotSpacelike,
    Ordering,
    SpacetimeEvent,
    boost_event,
    classify,
    flip_boost,
    gravitational_rate,
    interval_squared,
    light_time,
    medium_time,
    ordering_in_frame,
)
from .network import ExchangeNode, Jitter, Link, Medium, Network, node_position, paper_network
from .quotes import QuoteUpdate, Side, StreamSpec, generate_stream, load_scenario, theorem1_fixture, theorem1_network
from .consolidation import (
    ArrivalOrder,
    ArrivalRecord,
    BoostedFrameEmission,
    LabFrameEmission,
    NbboSeries,
    UncertaintyInterval,
    consolidate,
    consolidate_interval,
    deliver,
    es_conditions,
)
from .causal import (
    CausalGraph,
    build_causal_graph,
    causal_consistency_check,
    concurrent,
    happened_before,
    lamport_clocks,
)
from .analysis import FeedModel, detect_races, nbbo_divergence, race_summary, theorem1_witness
