"""
Static trace figures.

Needs the optional ``plot`` extra (matplotlib); figures are rendered with the
Agg backend straight to PNG.
"""

import logging
from pathlib import Path
from typing import Optional, Union

from .simulator import Trace

logger = logging.getLogger(__name__)


def plot_trace(
    trace: Trace,
    path: Union[str, Path],
    r_v: Optional[float] = None,
    title: Optional[str] = None,
) -> Optional[Path]:
    """
    Save v_c, i_l and u panels of a trace as PNG.

    Returns:
        Optional[Path]: Written file, or None when matplotlib is not installed
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping figure (install the 'plot' extra)")
        return None

    t_ms = trace.column("t") * 1e3
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    axes[0].plot(t_ms, trace.column("v_c"), lw=0.8)
    if r_v is not None:
        axes[0].axhline(r_v, color="k", ls="--", lw=0.6)
    axes[0].set_ylabel("v_c [p.u.]")
    axes[1].plot(t_ms, trace.column("i_l"), lw=0.8, color="tab:orange")
    axes[1].set_ylabel("i_l [p.u.]")
    axes[2].step(t_ms, trace.column("u"), where="post", lw=0.6, color="tab:green")
    axes[2].set_ylabel("u")
    axes[2].set_xlabel("t [ms]")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=120)
    plt.close(fig)
    logger.info(f"Figure written to {target}")
    return target
