# Copyright 2026 The ccr-lab Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent derivations of the reference numbers frozen into the tests.

Run with python3; prints each value at full precision.
"""

import math

import numpy as np
from scipy import stats


def softmax(z):
  z = np.asarray(z, dtype=float)
  e = np.exp(z - z.max())
  return e / e.sum()


def main():
  # Bayes accuracy of the causal block alone: threshold the causal sum.
  closed = stats.norm.cdf(0.25 * math.sqrt(20.0))
  rng = np.random.default_rng(0)
  n = 10**6
  y = rng.integers(0, 2, n)
  sign = np.where(y == 1, 1.0, -1.0)
  total = np.zeros(n)
  for _ in range(20):
    total += rng.normal(0.25 * sign, 1.0)
  mc = np.mean((total > 0) == (y == 1))
  print(f"bayes_causal closed={closed:.6f} monte_carlo={mc:.6f}")

  # Binomial band for observed group counts (1000 ideal rows per group).
  for p in (0.95, 0.05):
    print(f"group p={p}: mean={1000 * p:.1f} band={4 * math.sqrt(1000 * p * (1 - p)):.4f}")

  print("softmax (1,0):", softmax([1.0, 0.0]))

  # DeCov of two identical centered columns.
  f = np.array([[1.0, 1.0], [-1.0, -1.0]])
  fc = f - f.mean(axis=0)
  cov = fc.T @ fc / f.shape[0]
  print("decov duplicated:", 0.5 * ((cov**2).sum() - (np.diag(cov)**2).sum()))

  print("pns paper/pearl:", 0.9 - (1 - 0.8), 0.9 - 0.8)
  print("pns penalty (0.5,0.5):", -0.5 * (math.log(0.5) * 2))

  sizes = np.array([90, 10, 70, 30])
  p_hat = sizes / 200
  raw = 1 / (2 * p_hat)
  per_sample = np.repeat(raw, sizes)
  print("ccr p_hat:", p_hat, "raw:", raw, "group sums:", raw * sizes,
        "normalized:", raw / per_sample.mean())

  jtt = np.array([1, 1, 1, 2.0])
  print("jtt:", jtt / jtt.mean())

  afr = np.exp(-np.array([0.9, 0.1]))
  print("afr:", repr(afr / afr.mean()))

  obs = np.array([[0.9, 0.1], [0.1, 0.9]])
  print("oracle:", (1 / obs).ravel())

  print("metrics mean:", 4 / 6)

  # Occlusion attribution: identity encoder, W = diag(1, 0), three rows.
  x = np.array([[1.0, 2.0], [2.0, -1.0], [-1.0, 0.5]])
  w = np.diag([1.0, 0.0])
  base = np.array([softmax(r @ w) for r in x])
  causal = x.copy()
  causal[:, 0] = 0
  spur = x.copy()
  spur[:, 1] = 0
  pc = np.array([softmax(r @ w) for r in causal])
  ps = np.array([softmax(r @ w) for r in spur])
  print("attr causal:", repr(np.abs(pc - base).mean(axis=0)),
        "spurious:", np.abs(ps - base).mean(axis=0))


if __name__ == "__main__":
  main()
