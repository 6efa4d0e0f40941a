"""gridops: operations suite for a federated grid infrastructure.

Subsystems: hierarchical resource registry, service probing, SLA-grade
availability reporting, batch-job accounting with MPI correction, WMS
collector-agent alarms, and the operator-on-duty ticket workflow.
"""

__version__ = "0.1.0"
