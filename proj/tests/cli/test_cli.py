"""End-to-end checks of the meshgrad command-line driver.

Usage: test_cli.py /path/to/meshgrad
"""

import math
import subprocess
import sys
import tempfile
from pathlib import Path

BIN = None


def run(*args, cwd):
    return subprocess.run([BIN, *map(str, args)], cwd=cwd, capture_output=True, text=True, timeout=600)


def write_grid_obj(path, n, bump=0.0):
    lines = []
    for i in range(n):
        for j in range(n):
            x, y = j / (n - 1), i / (n - 1)
            z = bump * math.sin(2 * math.pi * x) * math.cos(math.pi * y)
            lines.append(f"v {x} {y} {z}")
    for i in range(n - 1):
        for j in range(n - 1):
            a = i * n + j + 1
            lines.append(f"f {a} {a + 1} {a + n + 1}")
            lines.append(f"f {a} {a + n + 1} {a + n}")
    path.write_text("\n".join(lines) + "\n")


def read_obj_vertices(path):
    return [tuple(map(float, l.split()[1:4])) for l in path.read_text().splitlines() if l.startswith("v ")]


def csv_rows(path):
    lines = path.read_text().strip().splitlines()
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)


def test_smooth(tmp):
    write_grid_obj(tmp / "in.obj", 8, bump=0.2)
    r = run("smooth", "--mesh", "in.obj", "--lambda", "0.01", "--iters", "100", "--out", "out.obj",
            "--report", "r.csv", cwd=tmp)
    check(r.returncode == 0, r.stderr)
    check((tmp / "out.obj").exists() and (tmp / "r.csv").exists(), "outputs missing")
    header, rows = csv_rows(tmp / "r.csv")
    check(header == ["iter", "energy", "grad_inf_norm", "step", "inner_iters", "time_ms"], header)
    check(len(rows) == 101, len(rows))
    energies = [float(row[1]) for row in rows]
    check(all(b < a for a, b in zip(energies, energies[1:])), "smoothing energy not decreasing")
    check("final energy" in r.stdout and "total" in r.stdout, r.stdout)
    check(len(read_obj_vertices(tmp / "out.obj")) == 64, "vertex count")

    m = run("smooth", "--mesh", "in.obj", "--lambda", "0.01", "--iters", "100", "--mode", "manual",
            "--out", "manual.obj", cwd=tmp)
    check(m.returncode == 0, m.stderr)
    check((tmp / "manual.obj").read_text() == (tmp / "out.obj").read_text(), "AD and manual outputs differ")


def test_cloth(tmp):
    r = run("cloth", "--grid", "8", "--steps", "10", "--h", "0.01", "--gravity", "0", "0", "-9.8",
            "--report", "c.csv", "--out", "c.obj", "--dump-hessian", "c.mtx", cwd=tmp)
    check(r.returncode == 0, r.stderr)
    check("derivative time per step" in r.stdout, r.stdout)
    header, rows = csv_rows(tmp / "c.csv")
    check(header[0] == "step" and len(rows) == 10, header)
    zs = [v[2] for v in read_obj_vertices(tmp / "c.obj")]
    check(min(zs) < -0.001, "cloth did not move")
    mtx = (tmp / "c.mtx").read_text().splitlines()
    check(mtx[0].startswith("%%MatrixMarket matrix coordinate real"), mtx[0])
    check(mtx[1].split()[:2] == ["192", "192"], mtx[1])


def test_cloth_rest_is_fixed_point(tmp):
    r = run("cloth", "--grid", "5", "--steps", "5", "--gravity", "0", "0", "0", "--out", "rest.obj", cwd=tmp)
    check(r.returncode == 0, r.stderr)
    for k, (x, y, z) in enumerate(read_obj_vertices(tmp / "rest.obj")):
        i, j = divmod(k, 5)
        check(abs(x - j / 4) < 1e-6 and abs(y - i / 4) < 1e-6 and abs(z) < 1e-6, "rest state moved")


def test_param(tmp):
    write_grid_obj(tmp / "disk.obj", 8, bump=0.15)
    r = run("param", "--mesh", "disk.obj", "--out", "uv.obj", "--report", "p.csv", cwd=tmp)
    check(r.returncode == 0, r.stderr)
    _, rows = csv_rows(tmp / "p.csv")
    energies = [float(row[1]) for row in rows]
    check(all(b <= a for a, b in zip(energies, energies[1:])), "param energy increased")
    bound = float(r.stdout.split("lower bound")[1].split()[0])
    check(energies[-1] >= bound, "energy below the analytic bound")
    check(all(abs(v[2]) == 0.0 for v in read_obj_vertices(tmp / "uv.obj")), "uv output not planar")


def test_sphere(tmp):
    r = run("sphere", "--icosphere", "1", "--iters", "50", "--out", "s.obj", "--report", "s.csv", cwd=tmp)
    check(r.returncode == 0, r.stderr)
    for v in read_obj_vertices(tmp / "s.obj"):
        check(abs(math.sqrt(sum(c * c for c in v)) - 1.0) < 1e-5, "point off the sphere")


def test_bench(tmp):
    r = run("bench", "--sizes", "16", "32", "--reps", "2", cwd=tmp)
    check(r.returncode == 0, r.stderr)
    lines = r.stdout.strip().splitlines()
    check(lines[0].split() == ["grid", "vertices", "ad_ms", "manual_ms", "ratio"], lines[0])
    check(len(lines) == 3, r.stdout)


def test_errors(tmp):
    r = run("smooth", "--mesh", "missing.obj", cwd=tmp)
    check(r.returncode == 1, r.returncode)
    check("missing.obj" in r.stderr, r.stderr)
    check(run("frobnicate", cwd=tmp).returncode == 2, "unknown subcommand")
    check(run("smooth", "--mesh", "x.obj", "--bogus", cwd=tmp).returncode == 2, "unknown flag")
    check(run(cwd=tmp).returncode == 2, "no subcommand")
    check(run("smooth", "--mesh", "x.obj", "--lambda", "-1", cwd=tmp).returncode == 2, "negative lambda")
    check(run("sphere", cwd=tmp).returncode == 2, "sphere without input")
    check(run("cloth", "--help", cwd=tmp).returncode == 0, "help")

    # planar projection of a flat quad is valid
    (tmp / "quad.obj").write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\n")
    ok = run("param", "--mesh", "quad.obj", "--init", "planar", cwd=tmp)
    check(ok.returncode == 0, ok.stderr)
    # a disk is not a valid sphere input
    write_grid_obj(tmp / "disk.obj", 3)
    bad = run("sphere", "--mesh", "disk.obj", cwd=tmp)
    check(bad.returncode == 1 and "error" in bad.stderr, bad.stderr)


def main():
    global BIN
    BIN = str(Path(sys.argv[1]).resolve())
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    failed = 0
    for t in tests:
        with tempfile.TemporaryDirectory() as d:
            try:
                t(Path(d))
                print(f"ok   {t.__name__}")
            except Exception as e:  # noqa: BLE001
                failed += 1
                print(f"FAIL {t.__name__}: {e}")
    print(f"{len(tests) - failed}/{len(tests)} passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
