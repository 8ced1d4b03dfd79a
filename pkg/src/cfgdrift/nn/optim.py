"""Adam with bias correction."""
import numpy as np

from .. import kernels


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros(p.data.size) for p in self.params]
        self.v = [np.zeros(p.data.size) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            # the update is in place; copy so arrays handed out earlier stay untouched
            data = np.array(p.data, dtype=np.float64).reshape(-1)
            g = np.ascontiguousarray(p.grad, dtype=np.float64).reshape(-1)
            kernels.adam_update(data, g, m, v, self.lr, self.beta1, self.beta2, c1, c2, self.eps)
            p.data = data.reshape(p.data.shape)
