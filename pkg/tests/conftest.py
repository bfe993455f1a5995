"""Shared fixtures: an in-process lockstep simulator plus a connected handle."""

import numpy as np
import pytest

from pandasim.client import Desk, Panda
from pandasim.server import SimServer


@pytest.fixture
def sim_server():
    server = SimServer(tcp_port=0, desk_port=0, udp_port=0, mode="lockstep")
    server.start_thread()
    yield server
    server.close()


@pytest.fixture
def desk(sim_server):
    d = Desk("127.0.0.1", "admin", "admin", port=sim_server.desk_port)
    yield d
    d.close()


@pytest.fixture
def panda(sim_server, desk):
    desk.unlock()
    desk.activate_fci()
    p = Panda("127.0.0.1", tcp_port=sim_server.tcp_port,
              udp_port=sim_server.udp_port)
    yield p
    p.close()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_server(**kw):
    server = SimServer(tcp_port=0, desk_port=0, udp_port=0, **kw)
    server.start_thread()
    return server


def connect(server):
    desk = Desk("127.0.0.1", "admin", "admin", port=server.desk_port)
    desk.unlock()
    desk.activate_fci()
    panda = Panda("127.0.0.1", tcp_port=server.tcp_port, udp_port=server.udp_port)
    return desk, panda
