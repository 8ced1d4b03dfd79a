"""Generator / classifier / discriminator networks."""
import numpy as np

from ..nn.layers import Dense, DenseBlock, GINLayer, GraphBatch, Module, jk_concat, readout
from ..nn.tensor import Tensor, no_grad, softmax_np


class GinGenerator(Module):
    """Stacked GIN-0 layers, per-iteration mean readouts, JK concat, dense."""

    def __init__(self, n_in, rng, hidden=64, n_layers=3, latent=256, readout_mode="mean"):
        super().__init__()
        self.layers = [GINLayer(n_in if k == 0 else hidden, hidden, rng) for k in range(n_layers)]
        self.head = DenseBlock(n_in + n_layers * hidden, latent, rng)
        self.readout_mode = readout_mode
        self.out_dim = latent

    @staticmethod
    def make_inputs(samples):
        return GraphBatch.from_graphs(samples)

    def __call__(self, batch):
        h = Tensor(batch.x)
        reads = [readout(h, batch.offsets, self.readout_mode)]
        for layer in self.layers:
            h = layer(h, batch)
            reads.append(readout(h, batch.offsets, self.readout_mode))
        return self.head(jk_concat(reads))


class MlpGenerator(Module):
    """Dense stack for fixed-length feature vectors."""

    def __init__(self, n_in, rng, widths=(100, 100, 100, 100, 100)):
        super().__init__()
        dims = (n_in,) + tuple(widths)
        self.layers = [DenseBlock(dims[k], dims[k + 1], rng) for k in range(len(widths))]
        self.out_dim = dims[-1]

    @staticmethod
    def make_inputs(samples):
        return np.vstack([np.asarray(getattr(s, "values", s), dtype=np.float64) for s in samples])

    def __call__(self, x):
        h = Tensor(x)
        for layer in self.layers:
            h = layer(h)
        return h


class Head(Module):
    """Hidden dense blocks followed by a linear output layer (logits)."""

    def __init__(self, n_in, widths, n_out, rng, zero_init_output=False):
        super().__init__()
        dims = (n_in,) + tuple(widths)
        self.hidden = [DenseBlock(dims[k], dims[k + 1], rng) for k in range(len(widths))]
        self.out = Dense(dims[-1], n_out, rng, zero_init=zero_init_output)

    def __call__(self, h):
        for layer in self.hidden:
            h = layer(h)
        return self.out(h)


class DaModel(Module):
    def __init__(self, generator, classifier, discriminator, n_classes, spec=None):
        super().__init__()
        self.generator = generator
        self.classifier = classifier
        self.discriminator = discriminator
        self.n_classes = n_classes
        self.spec = dict(spec or {})

    def make_inputs(self, samples):
        return self.generator.make_inputs(samples)

    def forward_latent(self, samples):
        """Eval-mode latent vectors, one row per sample."""
        prev = self.training
        self.eval()
        with no_grad():
            out = self.generator(self.make_inputs(samples)).data
        self.train(prev)
        return out

    def classify(self, samples):
        prev = self.training
        self.eval()
        with no_grad():
            logits = self.classifier(self.generator(self.make_inputs(samples))).data
        self.train(prev)
        return softmax_np(logits)

    def predict(self, samples):
        # argmax returns the lowest index on ties
        return np.argmax(self.classify(samples), axis=1)

    def domain_scores(self, latents):
        """Discriminator probability of domain 1 for precomputed latents."""
        prev = self.training
        self.eval()
        with no_grad():
            p = softmax_np(self.discriminator(Tensor(latents)).data)[:, 1]
        self.train(prev)
        return p


def build_model(n_in, n_classes, seed_seq, generator="gin", hidden=64, n_layers=3, latent=256,
                zero_init_output=False):
    """Build a model; ``seed_seq`` yields (generator+classifier, discriminator) streams."""
    rng_gc = np.random.default_rng(seed_seq[0])
    rng_d = np.random.default_rng(seed_seq[1])
    spec = dict(n_in=n_in, n_classes=n_classes, generator=generator, hidden=hidden,
                n_layers=n_layers, latent=latent, zero_init_output=zero_init_output)
    if generator == "gin":
        gen = GinGenerator(n_in, rng_gc, hidden=hidden, n_layers=n_layers, latent=latent)
        clf = Head(gen.out_dim, (latent,), n_classes, rng_gc, zero_init_output)
        disc = Head(gen.out_dim, (latent, latent), 2, rng_d)
    elif generator == "mlp":
        gen = MlpGenerator(n_in, rng_gc)
        clf = Head(gen.out_dim, (400, 400), n_classes, rng_gc, zero_init_output)
        disc = Head(gen.out_dim, (400, 400, 400, 400), 2, rng_d)
    else:
        raise ValueError(f"unknown generator {generator!r}")
    return DaModel(gen, clf, disc, n_classes, spec)


def model_from_spec(spec, seed=0):
    ss = np.random.SeedSequence(seed).spawn(3)
    return build_model(seed_seq=ss, **spec)


def save_model(model, path, meta=None):
    from ..nn.checkpoint import save_state

    save_state(path, model.state(), {"spec": model.spec, **(meta or {})})


def load_model(path):
    from ..nn.checkpoint import load_state

    state, meta = load_state(path)
    model = model_from_spec(meta["spec"])
    model.load_state(state)
    model.eval()
    return model, meta
