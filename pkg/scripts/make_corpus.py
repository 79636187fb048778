"""Regenerate the shipped fixture corpus under src/acx/corpus."""

import json
from pathlib import Path

import numpy as np

from acx.disc import Disc
from acx.fields import (BoxDomain, PolynomialMap, PolynomialScalar, block_structure,
                        random_structure, standard_structure)
from acx.io import dump
from acx.poly import Poly

OUT = Path(__file__).resolve().parents[1] / "src" / "acx" / "corpus"


def write(name, doc):
    (OUT / f"{name}.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def main():
    x = [Poly.var(4, i) for i in range(4)]
    y = [Poly.var(2, i) for i in range(2)]
    write("jst", dump(standard_structure(2), "structure", description="standard structure on C^2",
                      anchor="integrable reference structure J_st"))
    write("jst1", dump(standard_structure(1), "structure", description="standard structure on C",
                       anchor="integrable reference structure J_st"))
    write("perturbed", dump(random_structure(2, 0.05, np.random.default_rng(7)), "structure",
                            description="J_st + 0.05 * random affine perturbation (seed 7)",
                            anchor="small perturbations of the standard structure"))
    Jd = block_structure([(0.05 * x[0] * x[1], 0.05 * x[2]), (0.05 * x[1], 0.03 * x[3] * x[0])])
    write("diagonal", dump(Jd, "structure", description="diagonal perturbation, blocks depend on (z1, z2)",
                           anchor="diagonal coordinates: dJ-holomorphy splits into two scalar equations"))
    write("disc", dump(BoxDomain(2, -1.1, 1.1, PolynomialScalar(y[0] ** 2 + y[1] ** 2 - 1)), "domain",
                       description="unit disc in C", anchor="Schwarz lemma: K(0, 1) = 1"))
    write("disc_half", dump(BoxDomain(2, -0.6, 0.6, PolynomialScalar(y[0] ** 2 + y[1] ** 2 - 0.25)), "domain",
                            description="disc of radius 1/2 in C",
                            anchor="metric of a disc of radius d at its center is |tau| / d"))
    ball = PolynomialScalar(sum(v * v for v in x) - 1)
    write("ball", dump(BoxDomain(4, -1.1, 1.1, ball), "domain", description="unit ball in C^2 (sphere boundary)",
                       anchor="ball model: boundary blow-up rates and Hopf lemma"))
    write("ball_half", dump(BoxDomain(4, -0.6, 0.6, PolynomialScalar(sum(v * v for v in x) - 0.25)), "domain",
                            description="ball of radius 1/2 in C^2, nested in the unit ball",
                            anchor="monotonicity of the metric under domain inclusion"))
    write("model", dump(BoxDomain(4, -1.0, 1.0, PolynomialScalar(2 * x[2] + x[0] ** 2 + x[1] ** 2)), "domain",
                        description="model domain 2 Re z2 + |z1|^2 < 0 (boxed)",
                        anchor="model domain Sigma of the scaling limit"))
    write("model_k", dump(BoxDomain(4, -1.0, 1.0, PolynomialScalar(2 * x[2] + 2 * x[0] ** 2)), "domain",
                          description="2 Re z2 + |z1|^2 + Re(z1^2) < 0 (boxed)",
                          anchor="model domain with nonzero K(z1, 0)"))
    write("model_sheared", dump(BoxDomain(4, -1.0, 1.0,
                                          PolynomialScalar(2 * x[2] - 2 * (x[0] ** 2 - x[1] ** 2)
                                                           + x[0] ** 2 + x[1] ** 2)), "domain",
                                description="image of the model domain under the quadratic shear",
                                anchor="anisotropic estimates for the tangent map"))
    write("levi_flat", dump(PolynomialScalar(2 * x[2]), "scalar", description="Levi-flat hyperplane Re z2 = 0",
                            anchor="conormal bundle is not totally real when the Levi form degenerates"))
    write("shear", dump(PolynomialMap([x[0], x[1], x[2] + x[0] ** 2 - x[1] ** 2, x[3] + 2 * x[0] * x[1]]), "map",
                        description="quadratic shear (z1, z2 + z1^2)",
                        anchor="biholomorphism between model domains"))
    c, s = np.cos(0.3), np.sin(0.3)
    U = np.kron(np.array([[c, -s], [s, c]]), np.eye(2))
    write("rotation", dump(PolynomialMap([sum((x[j] * U[i, j] for j in range(4)), Poly.zero(4))
                                          for i in range(4)]), "map",
                           description="unitary rotation of C^2 by angle 0.3",
                           anchor="automorphism of the ball"))
    for n in (1, 2):
        write(f"torus_rh{n}", {"kind": "rh", "name": "torus", "n": n, "N": 16,
                               "description": f"torus |z_k| = 1 in C^{n} with reference disc (zeta,...)",
                               "anchor": "Riemann-Hilbert problem with a 3n-dimensional kernel"})
    write("reflection_q", {"kind": "deformation", "n": 1, "name": "y^4",
                           "entries": [[{"re": [{"coeff": 1.0, "exponents": [0, 4]}], "im": []}]],
                           "description": "q(lam, z) = lam * (Im z)^4, vanishing to order 4 on R",
                           "anchor": "reflection principle across a totally real boundary arc"})
    seed = Disc.holomorphic([[0, 0.5], [0, 0.3]], 16)
    write("seed_disc", dump(seed, "disc", description="holomorphic seed (0.5 zeta, 0.3 zeta)",
                            anchor="Picard iteration for the disc equation"))


if __name__ == "__main__":
    main()
