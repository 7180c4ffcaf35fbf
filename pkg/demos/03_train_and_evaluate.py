"""Train the likelihood MLP on a small dataset and compare against baselines.

This is a scaled-down version of the full workflow; the command-line tool
does the same with files on disk:

    lof generate --out data.csv --n 200
    lof train --data data.csv --out-checkpoint ck.txt --iterations 100
    lof evaluate --methods lof,bci,skf --checkpoint ck.txt --out results.csv

Run from the repository root (takes about a minute on one core):

    python demos/03_train_and_evaluate.py
"""

from lof import FusionConfig, TrainConfig, WorldConfig, evaluate, generate_dataset, smoothed, train

world = WorldConfig(horizon=30)
data = generate_dataset(world, 40, seed=11)
result = train(data, TrainConfig(iterations=30, batch_size=8, lr=0.01), world.assumed_evolution(),
               world.assumed_sensor(), FusionConfig())
loss = smoothed([row[1] for row in result.log])
print(f"smoothed training loss {loss[0]:.2f} -> {loss[-1]:.2f}")

rows, _ = evaluate(world, ["lof", "lof_tm", "bci", "skf"], 20, seed=1000, mlp=result.params)
for r in rows:
    if r.metric in ("mse_db", "mnll"):
        print(f"{r.method:7s} {r.metric:7s} {r.mean:9.2f} +- {r.std:.2f}")
