"""Classification, domain and alignment losses.

Functions default to the summed form; training passes ``reduction="mean"``.
"""
import numpy as np

from ..nn.tensor import Tensor, bce, column, exp, pairwise_sqdist, softmax, softmax_cross_entropy


def _one_hot_targets(labels, n_classes):
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(np.float64)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels.astype(np.int64)] = 1.0
    return out


def loss_classification(logits, labels, domains, lam, labeled=None, reduction="sum"):
    """CE over source rows plus ``lam`` times CE over labeled target rows.

    ``labels`` are class ids or one-hot rows; ``domains`` are 0 (source) / 1
    (target); ``labeled`` masks rows that carry a label (unlabeled rows never
    contribute).
    """
    domains = np.asarray(domains)
    n = logits.shape[0]
    labeled = np.ones(n, dtype=bool) if labeled is None else np.asarray(labeled, dtype=bool)
    targets = _one_hot_targets(labels, logits.shape[1])
    src = labeled & (domains == 0)
    tgt = labeled & (domains == 1)
    w = np.zeros(n)
    if reduction == "sum":
        w[src] = 1.0
        w[tgt] = lam
    elif reduction == "mean":
        if src.any():
            w[src] = 1.0 / src.sum()
        if tgt.any():
            w[tgt] = lam / tgt.sum()
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    # rows with zero weight still need valid targets
    targets[~labeled] = 1.0 / logits.shape[1]
    return softmax_cross_entropy(logits, targets, w)


def domain_probability(disc_logits):
    """Probability assigned to domain 1 by a two-way softmax discriminator."""
    return column(softmax(disc_logits), 1)


def loss_discriminator(d_hat, d, reduction="sum"):
    d = np.asarray(d, dtype=np.float64)
    loss = bce(d_hat, d)
    if reduction == "mean":
        return loss * (1.0 / d.shape[0])
    if reduction != "sum":
        raise ValueError(f"unknown reduction {reduction!r}")
    return loss


def loss_generator(d_hat, d, reduction="sum"):
    """Same form as the discriminator loss with the domain labels inverted."""
    return loss_discriminator(d_hat, 1.0 - np.asarray(d, dtype=np.float64), reduction)


def median_bandwidths(hs, ht, factors=(0.25, 0.5, 1.0, 2.0, 4.0)):
    """Kernel widths around the median pairwise distance of the pooled sample."""
    z = np.vstack([hs, ht])
    d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(-1)
    off = d2[~np.eye(len(z), dtype=bool)]
    med = np.median(off) if off.size else 1.0
    base = np.sqrt(med / 2.0) if med > 0 else 1.0
    return tuple(base * f for f in factors)


def _kernel_sum(d2, sigmas):
    out = None
    for s in sigmas:
        k = exp(d2 * (-1.0 / (2.0 * s * s)))
        out = k if out is None else out + k
    return out


def mmd_rbf(hs, ht, sigmas=None, unbiased=False):
    """Multi-kernel RBF MMD^2 between two latent sets.

    The default is the V-statistic (all pairs, including i == j), which is
    zero for identical sets and never negative.  ``unbiased=True`` drops the
    within-set diagonal terms.
    """
    hs = hs if isinstance(hs, Tensor) else Tensor(hs)
    ht = ht if isinstance(ht, Tensor) else Tensor(ht)
    if sigmas is None:
        sigmas = median_bandwidths(hs.data, ht.data)
    n, m = hs.shape[0], ht.shape[0]
    kss = _kernel_sum(pairwise_sqdist(hs, hs), sigmas)
    ktt = _kernel_sum(pairwise_sqdist(ht, ht), sigmas)
    kst = _kernel_sum(pairwise_sqdist(hs, ht), sigmas)
    if unbiased:
        if n < 2 or m < 2:
            raise ValueError("unbiased MMD needs at least two samples per set")
        ms = Tensor(1.0 - np.eye(n))
        mt = Tensor(1.0 - np.eye(m))
        xx = (kss * ms).sum() * (1.0 / (n * (n - 1)))
        yy = (ktt * mt).sum() * (1.0 / (m * (m - 1)))
    else:
        xx = kss.sum() * (1.0 / (n * n))
        yy = ktt.sum() * (1.0 / (m * m))
    return xx + yy - kst.sum() * (2.0 / (n * m))
