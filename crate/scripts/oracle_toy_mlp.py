"""Forward pass, loss and gradient of a 4-3-3 ReLU MLP, printed for freezing."""
import numpy as np

W1 = np.array([[0.5, -0.2, 0.1], [0.3, 0.8, -0.5], [-0.7, 0.1, 0.4], [0.2, -0.3, 0.9]])
B1 = np.array([0.1, -0.1, 0.05])
W2 = np.array([[1.0, -0.5, 0.2], [-0.3, 0.6, 0.1], [0.4, 0.2, -0.8]])
B2 = np.array([0.0, 0.1, -0.1])
X = np.array([1.0, -0.5, 0.25, 2.0])
Y = 2

z = X @ W1 + B1
h = np.maximum(z, 0)
logits = h @ W2 + B2
p = np.exp(logits - logits.max())
p /= p.sum()
loss = -np.log(p[Y])
d = p.copy()
d[Y] -= 1
gW2 = np.outer(h, d)
dz = (W2 @ d) * (z > 0)
gW1 = np.outer(X, dz)
np.set_printoptions(precision=17)
for name, v in [("z", z), ("logits", logits), ("probs", p), ("loss", loss), ("gb2", d), ("gW2", gW2.ravel()), ("gb1", dz), ("gW1", gW1.ravel())]:
    print(name, repr(np.atleast_1d(v).tolist()))
