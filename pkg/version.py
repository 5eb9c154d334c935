"""
CARD-Deck Toolkit Version Information
"""

__version__ = "1.0.0"
__app_name__ = "CARD-Deck Toolkit"
__description__ = "Prune, probe and gate compact networks into robust ensembles"
__license__ = "MIT"

VERSION_HISTORY = {
    "1.0.0": "Six compression methods, Fourier heatmaps, spectral gating and decks",
}

# Bumped whenever checkpoint or index binary layouts change
FORMAT_VERSION = 1

API_VERSION = "v1"


def get_version_info():
    """Get complete version information"""
    return {
        "version": __version__,
        "app_name": __app_name__,
        "description": __description__,
        "api_version": API_VERSION,
        "format_version": FORMAT_VERSION,
    }


def print_version():
    info = get_version_info()
    print(f"{info['app_name']} v{info['version']}")
    print(f"{info['description']}")
    print(f"API {info['api_version']}, file format {info['format_version']}")


if __name__ == "__main__":
    print_version()
