from .design import DesignEncoding, Predictors
from .cart import CartTree, draw_leaf, fit_cart
from .linear import LinearModel, draw_linear, fit_ols
from .logistic import LogisticModel, draw_class, fit_logistic
from .contingency import JointTable, draw_tuples, fit_joint_table

__all__ = [
    "CartTree",
    "DesignEncoding",
    "JointTable",
    "LinearModel",
    "LogisticModel",
    "Predictors",
    "draw_class",
    "draw_leaf",
    "draw_linear",
    "draw_tuples",
    "fit_cart",
    "fit_joint_table",
    "fit_logistic",
    "fit_ols",
]
