"""Tests for the MCP server's tool table and dispatch."""

import asyncio
import json

import pytest

from fj_workbench.config import WorkbenchConfig
from fj_workbench.server import WorkbenchJSONRPCError, WorkbenchMcpServer


@pytest.fixture
def server():
    return WorkbenchMcpServer(WorkbenchConfig(log_file=None))


def _call(server, name, arguments):
    contents = asyncio.run(server.dispatch(name, arguments))
    assert len(contents) == 1
    return json.loads(contents[0].text)


def test_tools_are_listed(server):
    names = {tool.name for tool in server.tools()}
    assert names == {"analyze", "dirichlet", "hyperelem", "torsion", "certify", "verify", "flow"}


def test_analyze_tool(server):
    report = _call(server, "analyze", {"matrix": [[2, 1], [1, 1]], "L": 2})
    assert report["K"] == "5"
    assert report["unimodular"] is True


def test_dirichlet_tool(server):
    assert _call(server, "dirichlet", {"K": 80, "lower": 2})["primes"] == ["241", "401"]


def test_workbench_errors_are_returned_as_content(server):
    report = _call(server, "analyze", {"matrix": [[2, 1], [1, 1]], "L": 0})
    assert report["error"] == "PreconditionFailed"


def test_unknown_tool(server):
    with pytest.raises(WorkbenchJSONRPCError) as info:
        asyncio.run(server.dispatch("list_projects", {}))
    assert info.value.code == -32601


def test_missing_parameter(server):
    with pytest.raises(WorkbenchJSONRPCError) as info:
        asyncio.run(server.dispatch("dirichlet", {"K": 5}))
    assert info.value.code == -32602
