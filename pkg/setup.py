from pathlib import Path
from setuptools import setup

setup(name='pyverhulst',
      version='0.1.0',
      description='Second-order put prices, Monte Carlo checks and bootstrap calibration '
                  'for the stochastic Verhulst volatility model',
      long_description=(Path(__file__).parent / "README.md").read_text(),
      long_description_content_type='text/markdown',
      author='pyverhulst contributors',
      author_email='',
      license='MIT',
      packages=['pyverhulst'],
      package_data={"pyverhulst": ["py.typed"]},
      python_requires=">=3.10",
      install_requires=[
          "numpy>=1.22",
          "scipy>=1.9"
      ],
      extras_require={"test": ["pytest>=7"]},
      entry_points={"console_scripts": ["pyverhulst=pyverhulst.cli:main"]},
      zip_safe=False)
