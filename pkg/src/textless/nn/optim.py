import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, lr):
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise NonFiniteGradient("non-finite gradient")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)

    def state_tensors(self, names):
        out = {}
        for name, m, v in zip(names, self.m, self.v):
            out[f"adam.m.{name}"] = m
            out[f"adam.v.{name}"] = v
        return out

    def load_state_tensors(self, names, tensors, t):
        for i, name in enumerate(names):
            self.m[i][...] = tensors[f"adam.m.{name}"]
            self.v[i][...] = tensors[f"adam.v.{name}"]
        self.t = int(t)


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum()) for p in params)))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= scale
    return total
