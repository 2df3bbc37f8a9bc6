"""Scikit-learn style estimator around the extraction model.

VrdExtractor exposes fit/predict/score plus get_params/set_params, so the model
composes with sklearn tooling (clone, grid search, pipelines operating on
lists of Documents).
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .docmodel import Document, Vocabulary
from .extractor import ExtractorOptions, Model, predict, train_supervised
from .nncore import load_checkpoint


def check_documents(X, require_labels: bool = False):
    """Validate that X is a non-empty sequence of Documents."""
    docs = list(X)
    if not docs:
        raise ValueError("expected a non-empty list of Documents")
    for d in docs:
        if not isinstance(d, Document):
            raise TypeError(f"expected Document instances, got {type(d).__name__}")
    if require_labels and not any(
        s for d in docs for p in d.pages for b in p.boxes for s in b.spans
    ):
        raise ValueError("documents carry no entity spans; labeled data is required")
    return docs


class VrdExtractor(BaseEstimator):
    """Layout-aware entity extractor: transformer text encoder + layout GCN +
    BIO tagging head, trained end to end on labeled Documents.

    Documents carry their own gold spans, so fit takes y=None. With
    use_gcn=False the model degrades to the text-only baseline.
    """

    def __init__(
        self,
        use_gcn=True,
        use_section_edges=False,
        use_font_features=True,
        use_skip_connections=True,
        encoder_dim=64,
        encoder_layers=2,
        encoder_heads=4,
        encoder_ffn=128,
        max_seq_len=50,
        dropout=0.1,
        gcn_hidden=64,
        gcn_layers=2,
        font_dim=8,
        max_font_ranks=16,
        merge_eps=1.0,
        eps_align=1.0,
        max_nodes=100,
        vocab_min_freq=2,
        lr_encoder=1e-3,
        lr_head=1e-3,
        batch_pages=4,
        max_epochs=40,
        patience=5,
        seed=0,
        init_checkpoint=None,
        vocabulary=None,
    ):
        self.use_gcn = use_gcn
        self.use_section_edges = use_section_edges
        self.use_font_features = use_font_features
        self.use_skip_connections = use_skip_connections
        self.encoder_dim = encoder_dim
        self.encoder_layers = encoder_layers
        self.encoder_heads = encoder_heads
        self.encoder_ffn = encoder_ffn
        self.max_seq_len = max_seq_len
        self.dropout = dropout
        self.gcn_hidden = gcn_hidden
        self.gcn_layers = gcn_layers
        self.font_dim = font_dim
        self.max_font_ranks = max_font_ranks
        self.merge_eps = merge_eps
        self.eps_align = eps_align
        self.max_nodes = max_nodes
        self.vocab_min_freq = vocab_min_freq
        self.lr_encoder = lr_encoder
        self.lr_head = lr_head
        self.batch_pages = batch_pages
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.init_checkpoint = init_checkpoint
        self.vocabulary = vocabulary

    def _options(self) -> ExtractorOptions:
        fields = set(ExtractorOptions.__dataclass_fields__)
        return ExtractorOptions(**{k: v for k, v in self.get_params().items() if k in fields})

    def fit(self, X, y=None, validation=None):
        """Train on labeled Documents; early stopping uses `validation` docs."""
        docs = check_documents(X, require_labels=True)
        val_docs = check_documents(validation) if validation else []
        init_params = None
        vocab = self.vocabulary
        if self.init_checkpoint is not None:
            init_params, config = load_checkpoint(self.init_checkpoint)
            if vocab is None and "vocab" in config:
                vocab = Vocabulary.from_list(config["vocab"])
        self.model_, self.history_ = train_supervised(
            docs, val_docs, self._options(), init_params=init_params, vocabulary=vocab
        )
        return self

    def predict(self, X):
        """Entity predictions per document, in the prediction output format."""
        check_is_fitted(self, "model_")
        return [predict(self.model_, d).to_dict() for d in check_documents(X)]

    def score(self, X, y=None) -> float:
        """Token-level micro F1 against the documents' own gold spans."""
        check_is_fitted(self, "model_")
        from .evalkit import evaluate_model

        return evaluate_model(self.model_, check_documents(X, require_labels=True)).micro_f1()

    def evaluate(self, X, span_level: bool = False) -> dict:
        """Full per-entity metrics report."""
        check_is_fitted(self, "model_")
        from .evalkit import evaluate_model

        return evaluate_model(
            self.model_, check_documents(X, require_labels=True), span_level=span_level
        ).to_report()

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        self.model_.save(path)

    @classmethod
    def load(cls, path) -> "VrdExtractor":
        model = Model.load(path)
        est = cls(**{k: getattr(model.options, k) for k in ExtractorOptions.__dataclass_fields__})
        est.model_ = model
        est.history_ = []
        return est
