"""Script to show the usage of the package as an API
"""
from retiming.generators import circle_path, kinematic_limits
from retiming.retimer import PathRetimer

def main():
    path = circle_path(200, radius=0.5)
    problem = kinematic_limits(path, vmax=1.0, amax=2.0)

    # default config
    retimer = PathRetimer()

    # custom config
    # retimer = PathRetimer("./example_config.json")

    profile = retimer.solve(problem)
    document = retimer.solution_document(problem, profile)
    print("Duration: {:.3f} s".format(document["duration"]))

    trajectory = retimer.retime(profile, problem)
    print("Sampled {} configurations".format(trajectory.q.shape[0]))
    retimer.save_solution(document, "circle_solution.json")

if __name__ == "__main__":
    main()
