"""Configuration-driven entry point of the package
"""
import os
import json
import math
import logging
from importlib import resources
from typing import Optional

import numpy as np

from . import elimination, oracle, retime
from .elimination import SolutionProfile, Strategy
from .errors import Untraversable
from .problem import DiscretizedProblem, PathSamples, load_problem

OBJECTIVES = ("auto", "topp", "quadratic")


def _finite_or_none(value):
    return float(value) if value is not None and math.isfinite(value) else None


class PathRetimer:

    """Solve, verify and time retiming problems with one configuration

    Attributes
    ----------
    config : dict
        The loaded config
    logger : logging.Logger
        Module logger
    """

    def __init__(self, config_path: str = None):
        self.logger = logging.getLogger(__name__)

        # Use the packaged config.json when no external config is given
        if config_path is None:
            with resources.as_file(resources.files(__package__).joinpath("config.json")) as default_path:
                self.config = self._load_config(str(default_path))
        else:
            self.config = self._load_config(config_path)
        self._validate_config(self.config)
        self.logger.debug("Using config %s", config_path or "config.json (packaged)")

    def _load_config(self, config_path: str) -> dict:
        """Load config from the config path

        Raises
        ------
        FileNotFoundError
            Raised when the config file was not found
        PermissionError
            Raised when there is no permission to read the config file
        json.JSONDecodeError
            Raised when the file is not valid JSON
        """
        if not os.path.isfile(config_path):
            raise FileNotFoundError("The config file at '{}' was not found".format(config_path))
        elif not os.access(config_path, os.R_OK):
            raise PermissionError("Permission denied to read config file")

        with open(config_path) as fp:
            text = fp.read()
        try:
            return json.loads(text)
        except json.JSONDecodeError as err:
            raise json.JSONDecodeError("Could not read JSON from config file", err.doc, err.pos)

    def _validate_config(self, config: dict):
        """Check that every section exists and every value is usable

        Raises
        ------
        KeyError
            Raised when a required section or key is missing
        ValueError
            Raised when a value is out of range
        """
        required = {
            "solver": ("objective", "x_floor", "feasibility_tolerance"),
            "pwq": ("merge_tolerance", "min_segment_width"),
            "retime": ("dt",),
            "bench": ("min_n", "max_n", "growth", "repetitions", "target"),
            "verify": ("max_n",),
        }
        for section, keys in required.items():
            if section not in config:
                raise KeyError("Section '{}' is not defined in config file".format(section))
            missing = [key for key in keys if key not in config[section]]
            if missing:
                raise KeyError("Keys {} are missing from section '{}'".format(missing, section))

        if config["solver"]["objective"] not in OBJECTIVES:
            raise ValueError("Objective must be one of {}".format(", ".join(OBJECTIVES)))
        if config["solver"]["x_floor"] < 0:
            raise ValueError("x_floor must be non-negative")
        for section, key in (("solver", "feasibility_tolerance"), ("pwq", "merge_tolerance"),
                             ("pwq", "min_segment_width"), ("retime", "dt")):
            if not config[section][key] > 0:
                raise ValueError("{}.{} must be positive".format(section, key))
        bench = config["bench"]
        if bench["min_n"] < 2 or bench["max_n"] < bench["min_n"]:
            raise ValueError("Bench sizes must satisfy 2 <= min_n <= max_n")
        if bench["growth"] <= 1 or bench["repetitions"] < 1:
            raise ValueError("Bench growth must exceed 1 and repetitions must be positive")
        if config["verify"]["max_n"] < 1:
            raise ValueError("verify.max_n must be positive")

    def load(self, problem_path: str) -> DiscretizedProblem:
        """Load a problem file, defaulting a missing x_floor from the config
        """
        return load_problem(problem_path, default_x_floor=self.config["solver"]["x_floor"])

    def solve(self, problem: DiscretizedProblem, objective: str = None) -> SolutionProfile:
        """Solve a problem with the configured objective and tolerances
        """
        return elimination.solve(problem, objective or self.config["solver"]["objective"],
                                 merge_tol=self.config["pwq"]["merge_tolerance"],
                                 min_width=self.config["pwq"]["min_segment_width"],
                                 tolerance=self.config["solver"]["feasibility_tolerance"])

    def verify(self, problem: DiscretizedProblem, profile: SolutionProfile) -> Optional[dict]:
        """Compare a profile against the dense reference solver

        Returns
        -------
        dict or None
            ``{"max_deviation", "oracle"}``; None when N is too large
        """
        max_n = self.config["verify"]["max_n"]
        if problem.N > max_n:
            self.logger.warning("Skipping verification: N = %d exceeds verify.max_n = %d", problem.N, max_n)
            return None
        if profile.strategy is Strategy.TOPP:
            reference = oracle.topp_oracle(problem, max_n=max_n)
        else:
            reference = oracle.qopp_oracle(problem, max_n=max_n)
        deviation = float(np.max(np.abs(profile.x - reference.x)))
        self.logger.info("Max deviation from the dense reference: %.3e", deviation)
        report = {"max_deviation": deviation, "oracle": reference.diagnostics.get("method")}
        if reference.objective_value is not None:
            report["oracle_objective"] = reference.objective_value
        return report

    def retime(self, profile: SolutionProfile, problem: DiscretizedProblem,
               path: PathSamples = None, dt: float = None) -> retime.TimedTrajectory:
        """Sample the timed trajectory of a profile

        Uses the problem's own path when none is given, and only s(t) when
        neither exists.
        """
        dt = dt or self.config["retime"]["dt"]
        path = path or problem.path
        if path is None:
            return retime.sample_profile(profile, problem.spacing, dt)
        return retime.sample_trajectory(path, profile, dt)

    def solution_document(self, problem: DiscretizedProblem, profile: SolutionProfile,
                          emit_diagnostics: bool = False) -> dict:
        """JSON-compatible description of a solved problem

        An untraversable profile keeps ``t`` and ``duration`` as null.
        """
        document = {
            "status": "solved",
            "strategy": profile.strategy.value,
            "x": profile.x.tolist(),
            "u": profile.u.tolist(),
            "t": None,
            "duration": None,
        }
        try:
            result = retime.timing(profile, problem.spacing)
            document["t"], document["duration"] = result.t.tolist(), result.duration
        except Untraversable as err:
            self.logger.warning("Profile has no finite duration: %s", err)
        if profile.objective_value is not None:
            document["objective_value"] = profile.objective_value

        diagnostics = {key: value for key, value in profile.diagnostics.items()}
        if profile.segment_counts:
            diagnostics["segment_counts"] = list(profile.segment_counts)
            diagnostics["max_segments"] = max(profile.segment_counts)
        if emit_diagnostics:
            diagnostics["reach_intervals"] = [[_finite_or_none(r.interval.lo), _finite_or_none(r.interval.hi)]
                                              for r in profile.reach_intervals]
        document["diagnostics"] = diagnostics
        return document

    def save_solution(self, document: dict, solution_path: str) -> str:
        """Write a solution document as JSON

        Returns
        -------
        str
            The path written
        """
        with open(solution_path, "w") as fp:
            json.dump(document, fp, sort_keys=True, indent=2, allow_nan=False)
        self.logger.info("Solution saved successfully (filepath: %s)", solution_path)
        return solution_path
