"""Entity recognition and linking for noisy conversational text."""
from .context_expect import ActiveExpectations, ExpectationRule, extract_expectations, load_lexicon, num_matches
from .discourse import DiscourseState, PronounLink, WebLink, resolve_pronouns, sync, web_link
from .kg_backend import CachingBackend, KgEntity, RemoteBackend, SnapshotIndex, build_snapshot, load_snapshot
from .pipeline import Linker, LinkResult, PipelineConfig, link_utterance
from .ranker import Mention, ScoredCandidate, WordVector, align, context_score, merge, overlap_score, prune, rank_span
from .segmenter import CandidateSpan, ParseTree, generate_candidates, parse_bracketed
from .text_norm import StopList, Token, normalize, tokenize

__version__ = "0.1.0"
