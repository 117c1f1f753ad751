"""
Class weights and the selection term
====================================

Class weights come from the classifier's average confidence on the
target set. Classes the target never predicts fall towards zero.
"""

import numpy as np

from ccpda import autodiff as ad
from ccpda.autodiff import Tensor
from ccpda.weighting import compute_class_weights, pseudo_label
from ccpda.losses import selection_loss

rng = np.random.default_rng(0)

# 200 target rows whose probability mass sits on classes 0-3 of 8
logits = rng.normal(size=(200, 8))
logits[:, :4] += 3.0
probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)

gamma = compute_class_weights(probs)
print("gamma      =", np.round(gamma.gamma, 3))
print("shared / outlier means =", np.round(gamma.split_means([0, 1, 2, 3]), 3))
print("pseudo-label counts =", np.bincount(pseudo_label(probs), minlength=8))

# selection term: mean over classes of the top probability any row gives it
# one-hot rows spread over every class give 1, a single shared row gives 1/K
k = 5
print("identity batch :", selection_loss(Tensor(np.eye(k))).item())
print("one-hot batch  :", selection_loss(Tensor(np.tile(np.eye(k)[0], (4, 1)))).item())
print("uniform batch  :", selection_loss(Tensor(np.full((4, k), 1 / k))).item())

# its gradient pushes each class' most confident row further up
p = Tensor(probs[:36], requires_grad=True)
ad.backward(selection_loss(p))
print("nonzero gradient entries:", int((p.grad != 0).sum()), "of", p.grad.size)
