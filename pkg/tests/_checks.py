"""Shared inequality checks used by the module tests and the acceptance suite."""

import math

import numpy as np

from mixcomp import info_measures as im
from mixcomp import types_engine as te

SLACK = 1e-9


def type_class_sandwich(n, k):
    """(n+1)^-|X| 2^{nH} <= |T_P| <= 2^{nH} for every type; returns the number checked."""
    checked = 0
    for t in te.enumerate_types(n, k):
        h = im.entropy_from_counts(t.counts)
        log_size = math.log2(te.type_class_size(t))
        assert log_size <= n * h + SLACK, t
        assert log_size >= n * h - k * math.log2(n + 1) - SLACK, t
        checked += 1
    return checked


def shell_sandwiches(n, kx, ky):
    """Shell-size and shell-to-class ratio bounds for every shell of every x-type."""
    checked = 0
    for t in te.enumerate_types(n, kx):
        for joint in te.shell_array(t, ky):
            h_cond = im.conditional_entropy_from_counts(joint)
            mi = im.mutual_information_from_counts(joint)
            log_shell = float(te.log2_shell_size(joint))
            assert log_shell <= n * h_cond + SLACK
            assert log_shell >= n * h_cond - kx * ky * math.log2(n + 1) - SLACK
            y_type = te.TypeVector(tuple(int(v) for v in joint.sum(axis=0)))
            log_ratio = log_shell - te.log2_type_class_size(y_type)
            assert log_ratio <= ky * math.log2(n + 1) - n * mi + SLACK
            assert log_ratio >= -kx * ky * math.log2(n + 1) - n * mi - SLACK
            checked += 1
    return checked


def exact_shell_log_ratio_matches(n, kx, ky):
    for t in te.enumerate_types(n, kx):
        for joint in te.shell_array(t, ky):
            shell = te.ShellDescriptor(t, tuple(map(tuple, joint.tolist())))
            y_type = te.shell_marginal_type(shell)
            exact = te.shell_size(shell) / te.type_class_size(y_type)
            assert math.isclose(2 ** (float(te.log2_shell_size(shell)) - te.log2_type_class_size(y_type)), exact,
                                rel_tol=1e-9)
