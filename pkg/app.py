"""
adsep command-line application

    python app.py simulate --n 4 --out-dir data/tiny --seed 7
    python app.py train --config config/recipes/tiny_overfit.json --manifest data/tiny/manifest.jsonl --out runs/tiny.ckpt
    python app.py separate --checkpoint runs/tiny.ckpt --inputs ch0.wav ch1.wav ch2.wav ch3.wav --out-dir out
    python app.py evaluate --checkpoint runs/tiny.ckpt --oracle --mixture --manifest data/test/manifest.jsonl --out-dir reports
"""
import sys

from src.cli.main import main

if __name__ == '__main__':
    sys.exit(main())
