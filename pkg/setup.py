from setuptools import find_packages, setup
from structsplat import __version__

setup(
    name='structsplat',
    version=__version__,
    description=(
        "Structure-aware densification for Gaussian splats: multi-scale "
        "structure tensors, frequency-violation voting and grid splitting."
    ),
    license='BSD',
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    python_requires='>=3.8',
    install_requires=[
        'Django>=3.2',
        'asgiref>=3.3',
        'numpy>=1.20',
        'scipy>=1.6',
        'Pillow>=8.0',
        'matplotlib>=3.6',
    ],
    extras_require={
        'tests': [
            'pytest>=6.2',
            "pytest-django>=4.1",
            "pytest-asyncio>=0.15",
            'coverage>=5.5',
        ],
    },
    entry_points={
        'console_scripts': ['structsplat = structsplat.cli:main'],
    },
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Framework :: Django',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering :: Image Processing',
    ],
)
