"""
CLI Context
-----------
State shared by every subcommand and the exit-code mapping of the `cdzsl` group.

Exit codes:
- 0: success
- 1: usage errors (click usage errors, `ConfigError`, `InvalidK`)
- 2: data errors
- 3: solver errors, including non-convergence when treated as fatal
"""

import sys
from dataclasses import dataclass
from typing import Any

import click

from cdzsl.core.exceptions import CdzslError, NonConvergence


@dataclass
class CliState:
    """Global options, stored as the click context object."""

    fatal_nonconvergence: bool = False


pass_state = click.make_pass_decorator(CliState, ensure=True)


def check_converged(state: CliState, failed: int, total: int, what: str) -> None:
    """
    Warns about unconverged solves, or raises when non-convergence is fatal.

    Raises:
        NonConvergence: If `failed > 0` and the fatal flag is set.
    """
    if failed == 0:
        return
    message = f"{failed} of {total} {what} did not converge"
    if state.fatal_nonconvergence:
        raise NonConvergence(message)
    click.secho(f"⚠️ {message}", fg="yellow", err=True)


class CdzslGroup(click.Group):
    """Click group that maps errors to the documented exit codes."""

    def main(  # type: ignore[override]
        self,
        args: list[str] | None = None,
        prog_name: str | None = None,
        standalone_mode: bool = True,
        **extra: Any,
    ) -> int:
        try:
            rv = super().main(args=args, prog_name=prog_name, standalone_mode=False, **extra)
        except click.UsageError as exc:
            exc.show()
            code = 1
        except click.ClickException as exc:
            exc.show()
            code = exc.exit_code
        except click.Abort:
            click.secho("❌ Aborted!", fg="red", err=True)
            code = 1
        except CdzslError as exc:
            click.secho(f"❌ {type(exc).__name__}: {exc}", fg="red", err=True)
            code = exc.exit_code
        else:
            code = rv if isinstance(rv, int) else 0
        if standalone_mode:
            sys.exit(code)
        return code
