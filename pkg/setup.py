from os.path import dirname, join

from setuptools import find_packages, setup

setup(
    name='porcupine',
    version='0.1.0',
    packages=find_packages('src'),
    package_dir={'': 'src'},
    long_description=open(join(dirname(__file__), 'README.md')).read(),
    install_requires=['numpy>=1.22', 'scipy>=1.9', 'typing-extensions>=4.5.0'],
    extras_require={'dev': ['pytest', 'mpmath']},
    entry_points={'console_scripts': ['porcupine=porcupine.cli:main']},
    include_package_data=True,
    license_files=('LICENSE.txt',),
)
