import numpy as np
import pytest

from mdicke.config import SolverConfig
from mdicke.model import ModelParams, atoms_only_energy
from mdicke.solver import (
    converge_ground_state,
    forced_jmax_ground_state,
    ground_state,
    sector_lower_bound,
    solve_sector_fixed,
)

from .oracles import brute_force_ground_energy, product_hamiltonian, product_state


def random_params(seed):
    rng = np.random.default_rng(seed)
    return ModelParams(
        n_atoms=int(rng.integers(1, 5)),
        lam=float(rng.uniform(0.0, 2.0)),
        capital_omega=float(rng.uniform(0.0, 4.0)),
    )


class TestOracleEquivalence:
    """Ground energies against brute force in the plain Fock x 2^N basis."""

    @pytest.mark.parametrize("seed", range(10))
    def test_random_draw(self, seed, tight_config):
        """Lowest energy over all sectors agrees to 1e-8."""
        params = random_params(seed)
        gs = ground_state(params, tight_config)
        assert gs.converged
        assert gs.energy == pytest.approx(brute_force_ground_energy(params), abs=1e-8)

    @pytest.mark.parametrize("params", [
        ModelParams(n_atoms=2, lam=1.2, capital_omega=0.0),
        ModelParams(n_atoms=3, lam=0.4, capital_omega=2.0, delta=0.5, omega=1.7),
        ModelParams(n_atoms=4, lam=0.9, capital_omega=2.2),
    ])
    def test_fixed_cases(self, params, tight_config):
        """Hand-picked points, including a non-resonant cavity."""
        gs = ground_state(params, tight_config)
        assert gs.energy == pytest.approx(brute_force_ground_energy(params), abs=1e-8)

    def test_reconstructed_state_is_eigenvector(self, tight_config):
        """The j = N/2 state rebuilt in the product basis solves the rotated oracle."""
        params = ModelParams(n_atoms=3, lam=0.7, capital_omega=0.5)
        gs = forced_jmax_ground_state(params, tight_config)
        psi = product_state(gs, cutoff=80)
        h = product_hamiltonian(params, cutoff=80, rotated=True)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.norm(h @ psi - gs.energy * psi) < 1e-6


class TestGroundState:
    """Variational choice of the angular momentum sector."""

    def test_weak_interaction_keeps_maximal_sector(self):
        """N=4, Omega=0.25, lambda=0.3 selects j=2."""
        assert ground_state(ModelParams(n_atoms=4, lam=0.3, capital_omega=0.25)).j == 2.0

    def test_strong_interaction_selects_singlet(self):
        """N=4, Omega=3, lambda=0.05 selects j=0 with zero energy."""
        gs = ground_state(ModelParams(n_atoms=4, lam=0.05, capital_omega=3.0))
        assert gs.j == 0.0
        assert gs.energy == pytest.approx(0.0, abs=1e-12)

    def test_strong_coupling_returns_to_maximal_sector(self):
        """N=4, Omega=3, lambda=1.5 selects j=2."""
        assert ground_state(ModelParams(n_atoms=4, lam=1.5, capital_omega=3.0)).j == 2.0

    def test_perturbative_energy(self):
        """N=4, lambda=0.01: energy of the j=2 sector stays at -2."""
        gs = converge_ground_state(ModelParams(n_atoms=4, lam=0.01), 2.0)
        assert gs.converged
        assert gs.energy == pytest.approx(-2.0, abs=1e-4)

    @pytest.mark.parametrize("j", [2.0, 1.0])
    def test_decoupled_sector_energy(self, j, tight_config):
        """At lambda=0 every sector sits at its atoms-only minimum."""
        params = ModelParams(n_atoms=4, lam=0.0, capital_omega=0.7)
        gs = converge_ground_state(params, j, tight_config)
        assert gs.energy == pytest.approx(atoms_only_energy(params, j), abs=1e-10)

    def test_singlet_sector(self):
        """j = 0 is the boson vacuum at zero energy."""
        gs = converge_ground_state(ModelParams(n_atoms=6, lam=0.8, capital_omega=1.0), 0.0)
        assert gs.energy == 0.0
        assert gs.c.shape == (1, 1)

    def test_sector_energies_recorded(self):
        """Solved sectors are kept next to the winner."""
        params = ModelParams(n_atoms=4, lam=0.6, capital_omega=2.2)
        gs = ground_state(params, SolverConfig(prune_sectors=False))
        assert set(gs.sector_energies) == {2.0, 1.0, 0.0}
        assert gs.energy == min(gs.sector_energies.values())

    def test_forced_sector_is_higher(self):
        """Forcing j = N/2 never lowers the energy."""
        for lam in (0.1, 0.5, 0.9, 1.4):
            params = ModelParams(n_atoms=4, lam=lam, capital_omega=2.5)
            assert forced_jmax_ground_state(params).energy >= ground_state(params).energy - 1e-10

    def test_truncation_cap(self):
        """Hitting n_tr_max returns an unconverged state."""
        config = SolverConfig(n_tr_start=2, n_tr_step=2, n_tr_max=4)
        gs = converge_ground_state(ModelParams(n_atoms=4, lam=1.5), 2.0, config)
        assert not gs.converged
        assert gs.n_tr_used == 4

    @pytest.mark.parametrize("lam", [0.005, 0.01])
    def test_residual_near_degenerate_boundary(self, lam):
        """At 2 Omega / N = Delta the energy is tiny and the residual stays below 1e-8 |E|."""
        gs = ground_state(ModelParams(n_atoms=4, lam=lam, capital_omega=2.0))
        assert gs.converged
        assert 0.0 < abs(gs.energy) < 1e-3
        assert gs.residual < 1e-8 * abs(gs.energy)

    def test_decoupled_boundary_point(self):
        """The exact tie at lambda = 0 converges without growing N_tr to the cap."""
        gs = ground_state(ModelParams(n_atoms=4, lam=0.0, capital_omega=2.0))
        assert gs.converged
        assert gs.energy == pytest.approx(0.0, abs=1e-12)
        assert gs.n_tr_used < SolverConfig().n_tr_max

    def test_deterministic(self):
        """Repeated solves give identical energies."""
        params = ModelParams(n_atoms=8, lam=0.55, capital_omega=0.25)
        assert ground_state(params).energy == ground_state(params).energy


class TestTruncation:
    """Variational growth of the displaced-Fock basis."""

    def test_energy_decreases_with_truncation(self, tight_config):
        """Adding boson states never raises the sector energy."""
        params = ModelParams(n_atoms=6, lam=0.8, capital_omega=0.5)
        energies = [solve_sector_fixed(params, 3.0, n_tr, tight_config).energy for n_tr in range(2, 30, 3)]
        assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))

    @pytest.mark.parametrize("lam,cap", [(0.3, 0.0), (0.9, 0.25), (1.3, 2.5)])
    def test_converged_truncation_is_stable(self, lam, cap, tight_config):
        """Ten more boson states past the converged truncation leave the energy unchanged."""
        params = ModelParams(n_atoms=6, lam=lam, capital_omega=cap)
        gs = converge_ground_state(params, 3.0, tight_config)
        wider = solve_sector_fixed(params, 3.0, gs.n_tr_used + 10, tight_config)
        assert wider.energy == pytest.approx(gs.energy, rel=1e-8)


class TestSectorPruning:
    """Lower bounds used to skip sectors."""

    @pytest.mark.parametrize("lam,cap", [(0.2, 0.0), (0.7, 1.0), (1.2, 2.2), (0.4, 2.5), (1.5, 4.0)])
    def test_bound_below_sector_energy(self, lam, cap):
        """The bound never exceeds the solved energy of its sector."""
        params = ModelParams(n_atoms=6, lam=lam, capital_omega=cap)
        for j in params.admissible_j():
            assert sector_lower_bound(params, j) <= converge_ground_state(params, j).energy + 1e-9

    @pytest.mark.parametrize("lam,cap", [(0.3, 0.25), (0.75, 2.5), (1.1, 3.0), (0.5, 5.0)])
    def test_pruning_is_exact(self, lam, cap):
        """Pruned and exhaustive searches choose the same sector and energy."""
        params = ModelParams(n_atoms=6, lam=lam, capital_omega=cap)
        pruned = ground_state(params, SolverConfig(prune_sectors=True))
        full = ground_state(params, SolverConfig(prune_sectors=False))
        assert pruned.j == full.j
        assert pruned.energy == pytest.approx(full.energy, abs=1e-9)

    def test_threaded_sectors(self):
        """Solving sectors on several threads gives the serial result."""
        params = ModelParams(n_atoms=6, lam=0.9, capital_omega=2.0)
        serial = ground_state(params, SolverConfig(prune_sectors=False))
        threaded = ground_state(params, SolverConfig(prune_sectors=False, workers=3))
        assert threaded.j == serial.j
        assert threaded.energy == serial.energy
