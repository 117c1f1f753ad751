"""
Tape autodiff and the gradient reversal layer
=============================================

A few hand-checkable gradients, then the reversal layer that lets one
backward pass train the feature extractor against the discriminator.
"""

import numpy as np

from ccpda import autodiff as ad
from ccpda.autodiff import Tensor

# y = sum(relu(W x)); gradient wrt W is the active mask times x
W = Tensor(np.array([[1.0, -2.0], [0.5, 0.5]]), requires_grad=True)
x = Tensor(np.array([[3.0], [1.0]]))
y = ad.sum(ad.relu(W @ x))
ad.backward(y)
print("y =", y.item())
print("dy/dW =\n", W.grad)

# compare against a central difference
def f(w):
    return np.maximum(w @ x.data, 0).sum()

h = 1e-6
fd = np.zeros_like(W.data)
for i in np.ndindex(W.shape):
    e = np.zeros_like(W.data)
    e[i] = h
    fd[i] = (f(W.data + e) - f(W.data - e)) / (2 * h)
print("finite difference =\n", fd)

# gradient reversal: identity forward, -coeff times the gradient backward
z = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
out = ad.sum(ad.grad_reverse(z, coeff=0.5) * Tensor(np.array([1.0, 1.0, 1.0])))
ad.backward(out)
print("reversed forward =", out.item(), " grad =", z.grad)

# gradients accumulate across two uses of the same leaf
a = Tensor(np.array(2.0), requires_grad=True)
ad.backward(a * a + a)
print("d(a^2 + a)/da at 2 =", a.grad)
