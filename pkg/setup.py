import setuptools

with open("README.rst", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="safmodel",
    use_scm_version={
        "relative_to": __file__,
        "write_to": "safmodel/version.py",
    },
    description="Superstructure optimization of Fischer-Tropsch fuel routes with embedded ReLU surrogates",
    long_description=long_description,
    packages=setuptools.find_packages(exclude=["tests"]),
    package_data={
        'safmodel': ['data/*.toml'],
    },
    python_requires='>=3.8',
    install_requires=[
        'numpy',
        'scipy>=1.7',
        'torch',
        'tomli; python_version < "3.11"',
    ],
    entry_points={
      'console_scripts': [
         'safmodel = safmodel.cli:run',
      ],
    },
    setup_requires=[
        'setuptools_scm',
        'wheel'
    ],
    extras_require={
        'docs': ['sphinx', 'python-docs-theme', 'sphinx-argparse'],
        'tests': ['pytest'],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
