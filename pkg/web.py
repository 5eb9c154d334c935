"""
Deck prediction server.

Loads a deck manifest once and serves predictions over JSON. Images are
posted as nested lists in NCHW order.
"""
from flask import Flask, jsonify, request
from flask_cors import CORS
import traceback
import logging
import signal
import sys

import numpy as np

from deck import MODES, load_deck, predict
from errors import CardDeckError, DimensionError
from gate import select
from settings import configure_logging, default_workers, env_int, env_str
from version import get_version_info

logger = logging.getLogger(__name__)


def _batch_from_request(deck, payload):
    if not payload or "images" not in payload:
        raise ValueError("Missing required field: images")
    batch = np.asarray(payload["images"], dtype=np.float32)
    expected = deck.cards[0].network.input_shape
    if batch.ndim == len(expected):
        batch = batch[None]
    if batch.shape[1:] != expected or len(batch) == 0:
        raise DimensionError("images do not match the deck input", expected=("N",) + expected,
                             actual=batch.shape)
    return batch


def create_app(deck, mode="agnostic", workers=None):
    app = Flask(__name__)
    CORS(app)
    workers = workers or default_workers()

    @app.route('/health')
    def health():
        return jsonify({"status": "ok", "cards": len(deck), "mode": mode})

    @app.route('/api/version')
    def version():
        return jsonify(get_version_info())

    @app.route('/api/deck')
    def describe_deck():
        try:
            return jsonify({
                "mode": mode,
                "memory_bits": deck.memory_bits,
                "groups": {aug: idx for aug, idx in deck.groups.items()},
                "gate": sorted(deck.gate),
                "cards": [card.describe() for card in deck.cards],
                "forward_counts": deck.forward_counts(),
            })
        except Exception as e:
            logger.error(f"Error describing deck: {e}")
            return jsonify({"error": str(e)}), 500

    @app.route('/api/predict', methods=['POST'])
    def predict_batch():
        try:
            payload = request.get_json(silent=True)
            batch = _batch_from_request(deck, payload)
            batch_mode = payload.get("mode", mode)
            if batch_mode not in MODES:
                return jsonify({"error": f"Unknown mode '{batch_mode}'"}), 400
            probs, decision = predict(deck, batch, batch_mode, workers)
            response = {
                "mode": batch_mode,
                "probabilities": probs.tolist(),
                "labels": np.argmax(probs, axis=1).tolist(),
            }
            if decision is not None:
                response["gate"] = decision.to_dict()
            return jsonify(response)
        except (ValueError, CardDeckError) as e:
            logger.warning(f"Rejected prediction request: {e}")
            return jsonify({"error": str(e)}), 400
        except Exception as e:
            logger.error(f"Prediction failed: {e}")
            logger.error(traceback.format_exc())
            return jsonify({"error": str(e)}), 500

    @app.route('/api/gate', methods=['POST'])
    def gate_batch():
        try:
            if not deck.gate:
                return jsonify({"error": "Deck has no gate indexes"}), 404
            batch = _batch_from_request(deck, request.get_json(silent=True))
            return jsonify(select(list(deck.gate.values()), batch).to_dict())
        except (ValueError, CardDeckError) as e:
            logger.warning(f"Rejected gate request: {e}")
            return jsonify({"error": str(e)}), 400
        except Exception as e:
            logger.error(f"Gate query failed: {e}")
            logger.error(traceback.format_exc())
            return jsonify({"error": str(e)}), 500

    @app.route('/api/counters', methods=['DELETE'])
    def reset_counters():
        deck.reset_counters()
        return jsonify({"success": True})

    return app


def shutdown_handler(deck):
    """Signal handler that logs how often each card ran, then exits"""
    def handle(signum, frame):
        counts = deck.forward_counts()
        per_card = ", ".join(f"{card.augmentation_id}={n}" for card, n in zip(deck.cards, counts))
        logger.info(f"Received {signal.Signals(signum).name}: {sum(counts)} card forward passes ({per_card}), shutting down...")
        sys.exit(0)
    return handle


def main(deck_path=None, host=None, port=None):
    configure_logging()
    deck_path = deck_path or env_str("CARDDECK_DECK")
    host = host or env_str("CARDDECK_HOST", "127.0.0.1")
    port = port or env_int("CARDDECK_PORT", 8000)
    if not deck_path:
        logger.critical("No deck manifest given (set CARDDECK_DECK or pass --deck)")
        sys.exit(1)

    try:
        logger.info(f"Loading deck from {deck_path}...")
        deck, mode = load_deck(deck_path)
        logger.info(f"Loaded {len(deck)} cards in {mode} mode")
        handler = shutdown_handler(deck)
        signal.signal(signal.SIGINT, handler)
        signal.signal(signal.SIGTERM, handler)
        app = create_app(deck, mode)
        logger.info(f"Starting Flask server on {host}:{port}...")
        app.run(host=host, port=port)
    except Exception as e:
        logger.critical(f"Failed to start server: {e}")
        traceback.print_exc()
        sys.exit(1)


if __name__ == '__main__':
    main()
