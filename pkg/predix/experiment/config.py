import json
import copy

from predix.io.utils import check_file_readability


# top-level sections of an experiment configuration file
config_sections = ('dataset', 'simulation', 'model', 'training', 'grid', 'attribution', 'report')


def default_config():
    """
    Empty configuration with all sections present.
    """
    return {section: {} for section in config_sections}


def load_config(filename=None, overrides=()):
    """
    Load an experiment configuration from a JSON file and apply dotted overrides.

    The file maps section names (dataset, simulation, model, training, grid,
    attribution, report) to option dictionaries, for example

        {"simulation": {"b_prog": 1.0, "b_pred": 0.5, "noise_sd": 0.05},
         "training": {"epochs": 10}}

    Parameters
    ----------
    filename : str, optional
        JSON configuration file. Without one, all sections start out empty.
    overrides : sequence of str
        Overrides of the form 'section.key=value'. Values are decoded as JSON when
        possible and kept as strings otherwise.

    Returns
    -------
    dict
    """
    config = default_config()
    if filename is not None:
        check_file_readability(filename)
        with open(filename, 'r') as file:
            try:
                content = json.load(file)
            except json.JSONDecodeError as error:
                raise ValueError(f'{filename} is not valid JSON: {error}') from None
        if not isinstance(content, dict):
            raise ValueError(f'{filename} must contain a JSON object of configuration sections')
        unknown = sorted(set(content) - set(config_sections))
        if unknown:
            raise ValueError(f'unknown configuration sections: {", ".join(unknown)}')
        for section, options in content.items():
            if not isinstance(options, dict):
                raise ValueError(f'configuration section {section} must be a JSON object')
            config[section].update(copy.deepcopy(options))

    for override in overrides:
        apply_override(config, override)
    return config


def apply_override(config, override):
    """
    Apply a single 'section.key=value' override in place. Nested keys are
    separated by dots.
    """
    if '=' not in override:
        raise ValueError(f"override '{override}' must have the form section.key=value")
    path, text = override.split('=', 1)
    keys = path.strip().split('.')
    if len(keys) < 2 or keys[0] not in config_sections or not all(keys):
        raise ValueError(f"override key '{path}' must start with one of: {', '.join(config_sections)}")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text

    node = config[keys[0]]
    for key in keys[1:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"override '{override}' descends into a non-object value")
    node[keys[-1]] = value
    return config
