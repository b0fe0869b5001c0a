from app.corpus.bank import VideoBank, build_bank, refresh_bank
from app.corpus.embedding import CorpusStats, Embedding, compute_stats, embed_corpus, embed_video, hash_tokens
from app.corpus.generator import Corpus, VideoClass, VideoRecord, generate_corpus
from app.corpus.store import load_corpus, save_corpus

__all__ = [
    "Corpus",
    "VideoClass",
    "VideoRecord",
    "VideoBank",
    "CorpusStats",
    "Embedding",
    "generate_corpus",
    "compute_stats",
    "embed_video",
    "embed_corpus",
    "hash_tokens",
    "build_bank",
    "refresh_bank",
    "save_corpus",
    "load_corpus",
]
