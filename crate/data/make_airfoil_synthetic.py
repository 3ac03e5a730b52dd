"""Write a synthetic stand-in for the UCI airfoil self-noise file.

Same layout as the public file: 1503 tab-separated rows, no header,
columns f, alpha, c, U_infinity, delta, SSPL. Inputs are drawn from the
value grids used in the original wind-tunnel data; the target is a smooth
Strouhal-number law with Gaussian noise.
"""

import numpy as np

FREQS = [200, 250, 315, 400, 500, 630, 800, 1000, 1250, 1600, 2000, 2500, 3150,
         4000, 5000, 6300, 8000, 10000, 12500, 16000, 20000]
ALPHAS = [0.0, 1.5, 2.0, 2.7, 3.0, 3.3, 4.0, 4.2, 4.8, 5.3, 5.4, 6.7, 7.2, 7.3,
          8.4, 8.9, 9.5, 9.9, 11.2, 12.3, 12.6, 12.7, 15.4, 15.6, 17.4, 19.7, 22.2]
CHORDS = [0.0254, 0.0508, 0.1016, 0.1524, 0.2286, 0.3048]
SPEEDS = [31.7, 39.6, 55.5, 71.3]


def main(path="airfoil_synthetic.dat", rows=1503, seed=20):
    rng = np.random.default_rng(seed)
    f = rng.choice(FREQS, rows).astype(float)
    alpha = rng.choice(ALPHAS, rows)
    c = rng.choice(CHORDS, rows)
    u = rng.choice(SPEEDS, rows)
    delta = c * (0.01 + 0.0015 * alpha) * (u / 40.0) ** -0.2
    st = f * delta / u
    y = (128.0 + 50.0 * np.log10(u / 40.0) / 5.0 - 5.4 * (np.log10(st) + 0.6) ** 2
         - 15.0 * c + rng.normal(0.0, 1.5, rows))
    with open(path, "w") as out:
        for row in zip(f, alpha, c, u, delta, y):
            out.write("%g\t%g\t%g\t%g\t%.9g\t%.3f\n" % row)


if __name__ == "__main__":
    main()
