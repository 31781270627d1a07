"""Rateless, double-sided z-private distributed matrix multiplication over F_q."""

from rpm3.gf import PrimeField, FieldElement, Polynomial
from rpm3.matgf import MatrixFq, matmul
from rpm3.master import run_protocol, cluster_workers, compute_d, lemma1_rate, improved_scheme_rate
from rpm3.scenario import Scenario, load_scenario, scenario_from_dict

__version__ = "0.1.0"
