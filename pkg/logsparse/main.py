from __future__ import annotations

import os
import json
from typing import Any, TypeVar
from pathlib import Path
from dataclasses import dataclass, fields
from configparser import ConfigParser

from .utils.log import error
from .utils.errors import ParseError

__all__ = ["Setup"]


@dataclass
class Setup:
    """
    Run-wide settings shared by the solvers, the localization pipeline and the command line.

    If you want to change any of the variables AFTER initialization make sure to use the `Setup.edit` function to do so.
    Other functions read the setup back from the environment and will not see direct attribute changes.

    :param config_file:     An ini file with a [SETUP] section the values will be loaded from.
                            Leave it empty or set None to only use the constructor values.
                            A missing file is created as a template and an error is raised.

    :param out_dir:         The folder every command writes its outputs into.
    :param seed:            Base seed for simulations, sampling and sweeps.
    :param threads:         Worker threads for sweeps and refinement candidates. 0 means all available cpus.
    :param p:               Default smoothing parameter of the surrogate.
    :param q:               Default exponent of the surrogate.
    :param max_iters:       Default iteration cap for the equality solver.
    :param debug:           Enable or Disable debug output of all functions in this package.
    """

    config_file: str | None = None

    out_dir: str = "out"
    seed: int = 0
    threads: int = 1
    p: float = 0.1
    q: float = 1.0
    max_iters: int = 200
    debug: bool = False

    def __post_init__(self):
        if self.config_file:
            config = ConfigParser()
            config_name = self.config_file

            if not os.path.exists(config_name):
                config["SETUP"] = {f.name: str(getattr(self, f.name)) for f in fields(self) if f.name != "config_file"}

                with open(config_name, "w", encoding="utf-8") as config_file:
                    config.write(config_file)

                raise error(f"Template config created at {Path(config_name).resolve()}.\nPlease set it up!", self)

            config.read(config_name, encoding="utf-8")
            if "SETUP" not in config:
                raise error(f"'{config_name}' has no [SETUP] section.", self, ParseError)
            settings = config["SETUP"]

            valid_bools = ["true", "1", "t", "y", "yes"]
            for key in settings:
                if not hasattr(self, key):
                    setattr(self, key, settings[key])
                    continue
                current = getattr(self, key)
                try:
                    if isinstance(current, bool):
                        setattr(self, key, settings[key].lower() in valid_bools)
                    elif isinstance(current, int):
                        setattr(self, key, int(settings[key]))
                    elif isinstance(current, float):
                        setattr(self, key, float(settings[key]))
                    else:
                        setattr(self, key, settings[key])
                except ValueError:
                    raise error(f"Invalid value '{settings[key]}' for '{key}' in '{config_name}'.", self, ParseError)

        from .utils.env import save_setup

        save_setup(self)

    def edit(self: SetupSelf, attr: str, value: Any) -> SetupSelf:
        """
        Sets a variable inside of Setup and saves it to the environment variables.
        You should use this to apply any changes because other functions will not make use of them otherwise!

        :param attr:        The name of the variable/attribute you want to change
        :param value:       The value this variable/attribute will have.
        """
        setattr(self, attr, value)

        from .utils.env import save_setup

        save_setup(self)
        return self

    def _toJson(self) -> str:
        return json.dumps(self.__dict__)


SetupSelf = TypeVar("SetupSelf", bound=Setup)
