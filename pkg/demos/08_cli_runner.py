# %% [markdown]
# # The command-line runner
#
# Every experiment is also available as `qmoney <command>`; reports are pure
# functions of the configuration and `--seed`, and embed both plus a hash
# of the package sources.

# %%
import json
import subprocess
import sys

def qmoney(*args):
    out = subprocess.run([sys.executable, "-m", "qmoney.cli", "--seed", "1", *args],
                         capture_output=True, text=True)
    return out.returncode, out.stdout

code, text = qmoney("orbits", "--builtin", "cycle:6")
print("exit", code)
print(json.dumps(json.loads(text)["rows"], indent=1))

# %%
code, text = qmoney("lemma-suite", "m2", "--format", "md")
print("exit", code)
print(text)

# %%
a = qmoney("klwe", "audit", "--trials", "30")[1]
b = qmoney("klwe", "audit", "--trials", "30")[1]
print("byte-identical reruns:", a == b)
