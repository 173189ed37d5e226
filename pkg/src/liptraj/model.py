"""The text-to-trajectory network.

A character-level convolutional encoder with a bidirectional LSTM feeds a
location-sensitive attention mechanism; an autoregressive two-cell LSTM
decoder emits one landmark-displacement frame (width 60 or 204) every
12.5 ms together with a stop-gate logit. Pre-Net and Post-Net are optional
blocks kept for ablations; the production configuration runs without them.

Execution is one utterance at a time: every intermediate is a 2-D array
whose leading axis is time (or 1 for per-step vectors). Batches exist at
the trainer level as gradient-accumulation groups.
"""

from dataclasses import dataclass, asdict, replace

import numpy as np

from . import autodiff as ad
from .errors import ContractError, ShapeError
from .params import ParamStore
from .resample import FRAME_RATE

GATE_ORDER = "ifgo"  # fused LSTM gate block order


@dataclass
class ModelConfig:
    charset_size: int = 30
    output_width: int = 60
    embedding_dim: int = 512
    encoder_convs: int = 3
    encoder_filters: int = 512
    encoder_kernel: int = 5
    encoder_lstm_dim: int = 512  # both directions combined
    decoder_lstm_dim: int = 1024
    attention_dim: int = 128
    location_filters: int = 32
    location_kernel: int = 31
    use_prenet: bool = False
    use_postnet: bool = False
    prenet_dims: tuple = (256, 256)
    postnet_layers: int = 5
    postnet_filters: int = 512
    postnet_kernel: int = 5
    encoder_dropout: float = 0.5
    prenet_dropout: float = 0.5
    postnet_dropout: float = 0.5
    gate_bias_init: float = 0.0
    preset: str = "full"

    def __post_init__(self):
        if self.output_width not in (60, 204):
            raise ContractError(f"output_width must be 60 or 204, got {self.output_width}")
        if self.encoder_lstm_dim % 2 != 0:
            raise ContractError("encoder_lstm_dim must be even (bidirectional halves)")
        self.prenet_dims = tuple(self.prenet_dims)

    def to_dict(self):
        d = asdict(self)
        d["prenet_dims"] = list(self.prenet_dims)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["prenet_dims"] = tuple(d.get("prenet_dims", (256, 256)))
        return cls(**d)


def full_config(**overrides):
    """Published architecture dimensions."""
    return replace(ModelConfig(preset="full"), **overrides)


def toy_config(**overrides):
    """Desk-scale preset: same topology, two orders of magnitude smaller."""
    cfg = ModelConfig(
        embedding_dim=32,
        encoder_convs=1,
        encoder_filters=32,
        encoder_kernel=5,
        encoder_lstm_dim=32,
        decoder_lstm_dim=64,
        attention_dim=32,
        location_filters=8,
        location_kernel=7,
        prenet_dims=(64, 64),
        postnet_filters=32,
        postnet_kernel=5,
        preset="toy",
    )
    return replace(cfg, **overrides)


PRESETS = {"full": full_config, "toy": toy_config}


@dataclass
class RunMode:
    """Forward-pass switches: dropout/batch statistics behavior."""

    training: bool = False
    rng: object = None          # np.random.Generator for dropout masks
    update_stats: bool = True   # batchnorm running-buffer updates

    @classmethod
    def train(cls, rng, update_stats=True):
        return cls(training=True, rng=rng, update_stats=update_stats)


EVAL = RunMode(training=False, rng=None, update_stats=False)


@dataclass
class EncodedText:
    memory: object      # (T_in, enc) DiffArray
    processed: object   # (T_in, attention_dim) DiffArray

    @property
    def length(self):
        return self.memory.shape[0]


@dataclass
class DecoderState:
    h0: object
    c0: object
    h1: object
    c1: object
    context: object      # (1, enc)
    prev_align: object   # (1, T_in)
    cum_align: object    # (1, T_in)
    prev_frame: object   # (1, width), bookkeeping for inference


@dataclass
class ForwardOutput:
    frames: object            # (T_out, width) DiffArray
    gate_logits: object       # (T_out,) DiffArray
    alignments: np.ndarray    # (T_out, T_in)
    postnet_frames: object = None  # (T_out, width) DiffArray when Post-Net on


@dataclass
class InferResult:
    frames: np.ndarray        # (N, width) displacements
    alignments: np.ndarray    # (N, T_in)
    stopped_by_gate: bool

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def duration_seconds(self):
        return self.num_frames / FRAME_RATE


def _xavier(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _bias(rng, size, fan_in):
    # Small fan-based range; an exactly-zero bias would park every ReLU
    # pre-activation of the go frame on the kink.
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=size)


class Model:
    """Holds the parameter store and implements every forward path."""

    def __init__(self, config, seed=0, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        self.store = ParamStore()
        self._build(np.random.default_rng([int(seed), 0x11F0]))

    # ------------------------------------------------------------------
    # Parameters

    def _add(self, name, array):
        self.store.add(name, array.astype(self.dtype))

    def _add_bn(self, prefix, channels):
        self.store.add(f"{prefix}.gamma", np.ones(channels, dtype=self.dtype))
        self.store.add(f"{prefix}.beta", np.zeros(channels, dtype=self.dtype))
        self.store.add_buffer(f"{prefix}.mean", np.zeros(channels, dtype=self.dtype))
        self.store.add_buffer(f"{prefix}.var", np.ones(channels, dtype=self.dtype))

    def _add_lstm(self, prefix, d_in, hidden, rng):
        w = _xavier(rng, (d_in + hidden, 4 * hidden), d_in + hidden, 4 * hidden)
        b = _bias(rng, 4 * hidden, hidden)
        b[hidden : 2 * hidden] += 1.0  # forget-gate bias helps early memory
        self._add(f"{prefix}.w", w)
        self._add(f"{prefix}.b", b)

    def _build(self, rng):
        cfg = self.config
        half = cfg.encoder_lstm_dim // 2

        self._add(
            "encoder.embedding",
            _xavier(rng, (cfg.charset_size, cfg.embedding_dim), cfg.charset_size, cfg.embedding_dim),
        )
        c_in = cfg.embedding_dim
        for i in range(cfg.encoder_convs):
            shape = (cfg.encoder_kernel, c_in, cfg.encoder_filters)
            self._add(
                f"encoder.conv{i}.w",
                _xavier(rng, shape, cfg.encoder_kernel * c_in, cfg.encoder_kernel * cfg.encoder_filters),
            )
            self._add(f"encoder.conv{i}.b", _bias(rng, cfg.encoder_filters, cfg.encoder_kernel * c_in))
            self._add_bn(f"encoder.conv{i}.bn", cfg.encoder_filters)
            c_in = cfg.encoder_filters
        self._add_lstm("encoder.lstm.fw", c_in, half, rng)
        self._add_lstm("encoder.lstm.bw", c_in, half, rng)

        enc = cfg.encoder_lstm_dim
        att = cfg.attention_dim
        dec = cfg.decoder_lstm_dim
        self._add("attention.query.w", _xavier(rng, (dec, att), dec, att))
        self._add("attention.memory.w", _xavier(rng, (enc, att), enc, att))
        self._add(
            "attention.location.conv.w",
            _xavier(rng, (cfg.location_kernel, 2, cfg.location_filters),
                    cfg.location_kernel * 2, cfg.location_kernel * cfg.location_filters),
        )
        self._add(
            "attention.location.dense.w",
            _xavier(rng, (cfg.location_filters, att), cfg.location_filters, att),
        )
        self._add("attention.v.w", _xavier(rng, (att, 1), att, 1))

        width = cfg.output_width
        if cfg.use_prenet:
            dims = (width,) + cfg.prenet_dims
            for i in range(len(cfg.prenet_dims)):
                self._add(
                    f"decoder.prenet.fc{i}.w",
                    _xavier(rng, (dims[i], dims[i + 1]), dims[i], dims[i + 1]),
                )
                self._add(f"decoder.prenet.fc{i}.b", _bias(rng, dims[i + 1], dims[i]))
            frame_in = cfg.prenet_dims[-1]
        else:
            frame_in = width
        self._add_lstm("decoder.rnn0", frame_in + enc, dec, rng)
        self._add_lstm("decoder.rnn1", dec + enc, dec, rng)
        self._add("decoder.proj.w", _xavier(rng, (dec + enc, width), dec + enc, width))
        self._add("decoder.proj.b", _bias(rng, width, dec + enc))
        self._add("gate.w", _xavier(rng, (dec + enc, 1), dec + enc, 1))
        self._add("gate.b", _bias(rng, 1, dec + enc) + cfg.gate_bias_init)

        if cfg.use_postnet:
            chans = (
                [width]
                + [cfg.postnet_filters] * (cfg.postnet_layers - 1)
                + [width]
            )
            for i in range(cfg.postnet_layers):
                shape = (cfg.postnet_kernel, chans[i], chans[i + 1])
                self._add(
                    f"postnet.conv{i}.w",
                    _xavier(rng, shape, cfg.postnet_kernel * chans[i], cfg.postnet_kernel * chans[i + 1]),
                )
                self._add(f"postnet.conv{i}.b", _bias(rng, chans[i + 1], cfg.postnet_kernel * chans[i]))
                self._add_bn(f"postnet.conv{i}.bn", chans[i + 1])

    # ------------------------------------------------------------------
    # Encoder

    def _lstm_sequence(self, xs, prefix, hidden, reverse=False):
        w = self.store[f"{prefix}.w"]
        b = self.store[f"{prefix}.b"]
        steps = xs.shape[0]
        h = ad.constant(np.zeros((1, hidden), dtype=self.dtype))
        c = ad.constant(np.zeros((1, hidden), dtype=self.dtype))
        order = range(steps - 1, -1, -1) if reverse else range(steps)
        rows = []
        for t in order:
            x_t = ad.slice_rows(xs, t, t + 1)
            h, c = ad.lstm_cell(x_t, h, c, w, b)
            rows.append(h)
        if reverse:
            rows.reverse()
        return ad.concat(rows, axis=0)

    def encoder_forward(self, token_ids, mode=EVAL):
        """Character ids -> attention memory, one row per input character."""
        token_ids = np.asarray(token_ids, dtype=np.int64)
        if token_ids.size == 0:
            raise ContractError("encoder needs a non-empty token sequence")
        cfg = self.config
        x = ad.embedding(self.store["encoder.embedding"], token_ids)
        for i in range(cfg.encoder_convs):
            x = ad.conv1d(x, self.store[f"encoder.conv{i}.w"], self.store[f"encoder.conv{i}.b"])
            x = ad.batchnorm1d(
                x,
                self.store[f"encoder.conv{i}.bn.gamma"],
                self.store[f"encoder.conv{i}.bn.beta"],
                self.store.buffer(f"encoder.conv{i}.bn.mean"),
                self.store.buffer(f"encoder.conv{i}.bn.var"),
                training=mode.training,
                update_stats=mode.training and mode.update_stats,
            )
            x = ad.relu(x)
            if mode.training and cfg.encoder_dropout > 0:
                x = ad.dropout(x, cfg.encoder_dropout, mode.rng)
        half = cfg.encoder_lstm_dim // 2
        fw = self._lstm_sequence(x, "encoder.lstm.fw", half)
        bw = self._lstm_sequence(x, "encoder.lstm.bw", half, reverse=True)
        memory = ad.concat([fw, bw], axis=1)
        processed = ad.matmul(memory, self.store["attention.memory.w"])
        return EncodedText(memory=memory, processed=processed)

    # ------------------------------------------------------------------
    # Attention

    def attention_step(self, query, encoded, prev_align, cum_align):
        """Location-sensitive additive attention for one decoder step.

        ``query`` is the first decoder cell's hidden state (1, dec);
        alignments are (1, T_in). Returns (context (1, enc), new alignments).
        """
        t_in = encoded.length
        if prev_align.shape != (1, t_in) or cum_align.shape != (1, t_in):
            raise ShapeError(
                f"attention: alignment shapes {prev_align.shape}/{cum_align.shape} "
                f"do not match memory length {t_in}"
            )
        pq = ad.matmul(query, self.store["attention.query.w"])  # (1, att)
        stacked = ad.concat(
            [ad.reshape(prev_align, (t_in, 1)), ad.reshape(cum_align, (t_in, 1))], axis=1
        )  # (T_in, 2)
        loc = ad.conv1d(stacked, self.store["attention.location.conv.w"])
        loc = ad.matmul(loc, self.store["attention.location.dense.w"])  # (T_in, att)
        energies = ad.matmul(
            ad.tanh(ad.add(ad.add(loc, encoded.processed), pq)),
            self.store["attention.v.w"],
        )  # (T_in, 1)
        align = ad.softmax(ad.reshape(energies, (1, t_in)))
        context = ad.matmul(align, encoded.memory)  # (1, enc)
        return context, align

    # ------------------------------------------------------------------
    # Decoder

    def init_decoder_state(self, encoded):
        cfg = self.config
        z = lambda *shape: ad.constant(np.zeros(shape, dtype=self.dtype))
        t_in = encoded.length
        return DecoderState(
            h0=z(1, cfg.decoder_lstm_dim),
            c0=z(1, cfg.decoder_lstm_dim),
            h1=z(1, cfg.decoder_lstm_dim),
            c1=z(1, cfg.decoder_lstm_dim),
            context=z(1, cfg.encoder_lstm_dim),
            prev_align=z(1, t_in),
            cum_align=z(1, t_in),
            prev_frame=z(1, cfg.output_width),
        )

    def _prenet(self, y, mode):
        cfg = self.config
        for i in range(len(cfg.prenet_dims)):
            y = ad.relu(
                ad.add(
                    ad.matmul(y, self.store[f"decoder.prenet.fc{i}.w"]),
                    self.store[f"decoder.prenet.fc{i}.b"],
                )
            )
            if mode.training and cfg.prenet_dropout > 0:
                y = ad.dropout(y, cfg.prenet_dropout, mode.rng)
        return y

    def decoder_step(self, prev_frame, state, encoded, mode=EVAL):
        """One 12.5 ms step: previous frame -> (frame, gate logit, new state)."""
        cfg = self.config
        y = prev_frame if isinstance(prev_frame, ad.DiffArray) else ad.constant(prev_frame, self.dtype)
        if y.shape != (1, cfg.output_width):
            raise ShapeError(
                f"decoder_step: previous frame must be (1, {cfg.output_width}), got {y.shape}"
            )
        if cfg.use_prenet:
            y = self._prenet(y, mode)
        x0 = ad.concat([y, state.context], axis=1)
        h0, c0 = ad.lstm_cell(x0, state.h0, state.c0,
                              self.store["decoder.rnn0.w"], self.store["decoder.rnn0.b"])
        context, align = self.attention_step(h0, encoded, state.prev_align, state.cum_align)
        cum = ad.add(state.cum_align, align)
        x1 = ad.concat([h0, context], axis=1)
        h1, c1 = ad.lstm_cell(x1, state.h1, state.c1,
                              self.store["decoder.rnn1.w"], self.store["decoder.rnn1.b"])
        hc = ad.concat([h1, context], axis=1)
        frame = ad.add(ad.matmul(hc, self.store["decoder.proj.w"]), self.store["decoder.proj.b"])
        gate = ad.add(ad.matmul(hc, self.store["gate.w"]), self.store["gate.b"])
        new_state = DecoderState(
            h0=h0, c0=c0, h1=h1, c1=c1,
            context=context, prev_align=align, cum_align=cum, prev_frame=frame,
        )
        return frame, gate, new_state

    # ------------------------------------------------------------------
    # Post-Net

    def postnet_forward(self, frames, mode=EVAL):
        """Residual refinement: 5 convolutions, tanh on all but the last."""
        cfg = self.config
        if not cfg.use_postnet:
            raise ContractError("postnet_forward called with use_postnet disabled")
        x = frames
        for i in range(cfg.postnet_layers):
            x = ad.conv1d(x, self.store[f"postnet.conv{i}.w"], self.store[f"postnet.conv{i}.b"])
            x = ad.batchnorm1d(
                x,
                self.store[f"postnet.conv{i}.bn.gamma"],
                self.store[f"postnet.conv{i}.bn.beta"],
                self.store.buffer(f"postnet.conv{i}.bn.mean"),
                self.store.buffer(f"postnet.conv{i}.bn.var"),
                training=mode.training,
                update_stats=mode.training and mode.update_stats,
            )
            if i < cfg.postnet_layers - 1:
                x = ad.tanh(x)
            if mode.training and cfg.postnet_dropout > 0:
                x = ad.dropout(x, cfg.postnet_dropout, mode.rng)
        return x

    # ------------------------------------------------------------------
    # Whole-utterance paths

    def forward_teacher_forced(self, token_ids, targets, mode=EVAL):
        """Run the decoder fed with ground-truth previous frames.

        ``targets`` is (T_out, width); step t consumes target t-1 (step 0
        consumes the all-zero go frame). Output length equals target length.
        """
        cfg = self.config
        targets = np.asarray(targets)
        if targets.ndim != 2 or targets.shape[1] != cfg.output_width:
            raise ShapeError(
                f"targets must be (frames, {cfg.output_width}), got {targets.shape}"
            )
        encoded = self.encoder_forward(token_ids, mode)
        state = self.init_decoder_state(encoded)
        prev = ad.constant(np.zeros((1, cfg.output_width), dtype=self.dtype))
        rows, gates, aligns = [], [], []
        for t in range(targets.shape[0]):
            frame, gate, state = self.decoder_step(prev, state, encoded, mode)
            rows.append(frame)
            gates.append(gate)
            aligns.append(state.prev_align.data[0].copy())
            prev = ad.constant(targets[t : t + 1].astype(self.dtype))
        frames = ad.concat(rows, axis=0)
        gate_logits = ad.reshape(ad.concat(gates, axis=0), (targets.shape[0],))
        postnet_frames = None
        if cfg.use_postnet:
            postnet_frames = ad.add(frames, self.postnet_forward(frames, mode))
        return ForwardOutput(
            frames=frames,
            gate_logits=gate_logits,
            alignments=np.stack(aligns) if aligns else np.zeros((0, encoded.length)),
            postnet_frames=postnet_frames,
        )

    def infer(self, token_ids, gate_threshold=0.5, max_frames=1000):
        """Autoregressive generation until the gate fires or the cap hits.

        Returns an :class:`InferResult`; ``frames`` are displacement rows at
        80 fps, so N frames span N/80 seconds.
        """
        encoded = self.encoder_forward(token_ids, EVAL)
        state = self.init_decoder_state(encoded)
        prev = ad.constant(np.zeros((1, self.config.output_width), dtype=self.dtype))
        frames, aligns = [], []
        stopped = False
        for _ in range(max_frames):
            frame, gate, state = self.decoder_step(prev, state, encoded, EVAL)
            frames.append(frame.data[0].copy())
            aligns.append(state.prev_align.data[0].copy())
            g = float(gate.data)
            if 1.0 / (1.0 + np.exp(-g)) > gate_threshold:
                stopped = True
                break
            prev = frame
        width = self.config.output_width
        out = (
            np.array(frames, dtype=np.float64)
            if frames
            else np.zeros((0, width), dtype=np.float64)
        )
        return InferResult(
            frames=out.reshape(len(frames), width),
            alignments=np.stack(aligns) if aligns else np.zeros((0, encoded.length)),
            stopped_by_gate=stopped,
        )
