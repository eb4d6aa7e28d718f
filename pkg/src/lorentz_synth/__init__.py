"""lorentz_synth: numerical toolkit for synthetic timelike curvature comparison.

Subpackages/modules:
  extreal        -- extended-real sentinel values and arithmetic conventions
  distortion     -- generalized sine functions, sigma/tau distortion
                    coefficients, defect-estimate constants and bound
  onedim         -- one-dimensional CD(kappa, N) densities, deficit integrals,
                    diameter estimates
  models         -- analytic/lattice model spacetimes (time separation,
                    geodesics, weighted volumes, diameters)
  lipschitz_grid -- gridded Lipschitz metrics: mollification, finite-difference
                    curvature tensors, cone comparison, L^p deficits
  transport      -- discrete q-Lorentz-Wasserstein transport, dynamical
                    couplings, Renyi entropy
  comparison     -- end-to-end inequality verifiers (entropy contraction,
                    volume comparison, diameter bounds, wave-operator
                    comparison, needle decomposition)
  cli            -- experiment runner (`lorentz-synth` console script)
"""

__version__ = "0.1.0"
