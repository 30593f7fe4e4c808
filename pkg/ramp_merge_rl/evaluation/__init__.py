"""
Evaluation: greedy-policy metrics, the toy-MDP oracle and gradient checks.
"""

from .metrics import EvalReport, episode_return, evaluate, trace_episode
from .oracle import OracleTable, compare_with_oracle, oracle_q_iteration
from .gradcheck import check_loss_gradients, check_network_gradients
