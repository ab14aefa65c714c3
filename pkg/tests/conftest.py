import numpy as np
import pytest

from prototouch.contact_sim import default_protocol, synthesize_dataset
from prototouch.kinematics import Joint, KinematicChain, SurfacePoint, make_transform, preset_chain
from prototouch.model import REGRESSION, TrainConfig, train


def build_planar_chain():
    """Two-link planar arm, both joints about +z, 1 m links along +x.

    The tip is surface point 0 at local (1,0,0) on link2, so the home tip sits
    at (2,0,0).
    """
    links = [("base", "base"), ("link1", "link1"), ("link2", "link2")]
    joints = [
        Joint("j1", "base", "link1", make_transform((0, 0, 0)), np.array([0.0, 0.0, 1.0]), (-np.pi, np.pi)),
        Joint("j2", "link1", "link2", make_transform((1, 0, 0)), np.array([0.0, 0.0, 1.0]), (-np.pi, np.pi)),
    ]
    points = [
        SurfacePoint(0, "link2", np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
        SurfacePoint(1, "link1", np.array([0.5, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    ]
    return KinematicChain("planar2", links, joints, surface_points=points)


@pytest.fixture
def planar_chain():
    return build_planar_chain()


# Deployment-grade quadruped bundle shared by the server tests and the
# acceptance suite. Collection spans more postures per point than the desk
# default, and the deployed model trains with light dropout; both choices are
# recorded in the decisions log. Built once per session (roughly two minutes).
SPOT_SERVE_SEED = 11
SPOT_SERVE_REPS = 8
SPOT_SERVE_SPREAD = 0.2
SPOT_SERVE_DROPOUT = 0.1


@pytest.fixture(scope="session")
def spot_bundle():
    chain = preset_chain("spotlike")
    protocol = default_protocol(
        "spotlike",
        seed=SPOT_SERVE_SEED,
        reps_per_point=SPOT_SERVE_REPS,
        config_spread=SPOT_SERVE_SPREAD,
    )
    dataset = synthesize_dataset(chain, chain.surface_points, protocol)
    model, _ = train(dataset, REGRESSION, TrainConfig(seed=SPOT_SERVE_SEED, dropout_rate=SPOT_SERVE_DROPOUT))
    return chain, dataset, model
