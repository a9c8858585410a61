import setuptools

with open("README.md", "r") as fp:
    long_description = fp.read()

setuptools.setup(
    name="path-retiming",
    version="0.1.0",
    author="Eshwanth",
    author_email="eshwanth.95@gmail.com",
    description="Linear-time retiming of robot paths under velocity, acceleration and actuator limits",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["examples", "examples.*"]),
    include_package_data=True,
    package_data={
        'retiming': ['config.json'],
    },
    classifiers=[
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    install_requires=[
        'numpy',
        'scipy>=1.6'
    ],
    entry_points={
        'console_scripts': ['retime=retiming.cli:main'],
    },
    python_requires='>=3.9',
)
